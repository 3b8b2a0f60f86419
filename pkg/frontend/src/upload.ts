/** Upload flow: quota display, rejection detail, scored-result rendering.
 *  API error codes are surfaced verbatim alongside the human text. */

import { ApiError, ApiClient, isRejection } from './api.js'
import { costCell, escapeHtml, fmtWhen } from './format.js'
import type { RejectionDetail, SubmissionView } from './types.js'

export interface UploadOutcome {
  kind: 'accepted' | 'rejected' | 'error'
  html: string
  submission: SubmissionView | null
}

/** Quota slots left today, derived from own history (3 scoring attempts
 *  per UTC day; parse failures are free and never appear in history). */
export function quotaRemaining(
  history: SubmissionView[],
  quotaPerDay: number,
  now: Date,
): number {
  const today = now.toISOString().slice(0, 10)
  const used = history.filter((s) => s.received_at.slice(0, 10) === today).length
  return Math.max(0, quotaPerDay - used)
}

/** Next UTC midnight, when the daily quota resets. */
export function nextAllowedUtc(now: Date): string {
  const next = new Date(Date.UTC(
    now.getUTCFullYear(), now.getUTCMonth(), now.getUTCDate() + 1,
  ))
  return next.toISOString().replace('.000Z', 'Z')
}

export function quotaBanner(error: ApiError, now: Date): string {
  return `<div class="banner error" data-code="${error.code}">
  <strong>${error.code}</strong>: ${escapeHtml(error.message)}<br>
  Next submission allowed at ${nextAllowedUtc(now)} (UTC).
</div>`
}

export function renderRejection(code: string, message: string, detail: RejectionDetail): string {
  const rows = (pairs: [string, string][], label: string) =>
    pairs
      .map(([m, s]) => `<tr><td>${label}</td><td>${escapeHtml(m)}</td><td>${escapeHtml(s)}</td></tr>`)
      .join('\n')
  const truncated =
    detail.missing.length < detail.n_missing || detail.extra.length < detail.n_extra
      ? `<p class="hint">showing the first ${detail.missing.length} missing / ${detail.extra.length} extra</p>`
      : ''
  return `<div class="banner error" data-code="${code}">
  <strong>${code}</strong>: ${escapeHtml(message)}
  <p>${escapeHtml(detail.summary)}</p>
  ${truncated}
  <table class="report">
    <thead><tr><th>problem</th><th>modelid</th><th>segmentid</th></tr></thead>
    <tbody>
${rows(detail.missing, 'missing')}
${rows(detail.extra, 'extra')}
    </tbody>
  </table>
</div>`
}

export function renderScored(sub: SubmissionView): string {
  const progress = sub.progress
  if (!progress) return '<div class="banner">scored</div>'
  return `<div class="banner ok" data-submission="${sub.submission_id}">
  <strong>accepted</strong> as ${sub.submission_id} at ${fmtWhen(sub.received_at)}
  <table class="scores">
    <thead><tr><th>subset</th><th>actual</th><th>min</th></tr></thead>
    <tbody><tr><td>progress</td>${costCell(progress.actual)}${costCell(progress.min_cost)}</tr></tbody>
  </table>
  <p class="hint">test-subset results are withheld until an official snapshot.</p>
</div>`
}

export function renderGenericError(error: ApiError): string {
  return `<div class="banner error" data-code="${error.code}">
  <strong>${error.code}</strong>: ${escapeHtml(error.message)}
</div>`
}

export async function uploadScores(
  api: ApiClient,
  file: Blob,
  filename: string,
  now: () => Date = () => new Date(),
): Promise<UploadOutcome> {
  try {
    const submission = await api.submitScores(file, filename)
    return { kind: 'accepted', html: renderScored(submission), submission }
  } catch (err) {
    if (!(err instanceof ApiError)) throw err
    if (err.code === 'QUOTA_EXCEEDED') {
      return { kind: 'error', html: quotaBanner(err, now()), submission: null }
    }
    if (err.code === 'VALIDATION_FAILED' && isRejection(err.detail)) {
      return {
        kind: 'rejected',
        html: renderRejection(err.code, err.message, err.detail),
        submission: null,
      }
    }
    return { kind: 'error', html: renderGenericError(err), submission: null }
  }
}
