/** App shell: session handling, tab navigation, and DOM wiring. The api
 *  token lives in memory only; a reload requires pasting it again. */

import { ApiClient, ApiError } from './api.js'
import { computeChartModel, paintChart } from './detchart.js'
import { renderCellTable, renderHistory } from './history.js'
import { BoardPoller } from './leaderboard.js'
import { uploadScores } from './upload.js'

const api = new ApiClient('')
let uploadInFlight = false

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing element #${id}`)
  return node as T
}

function show(banner: string, target = 'upload-result'): void {
  el(target).innerHTML = banner
}

function setSessionState(active: boolean): void {
  document.body.classList.toggle('authed', active)
  el('session-state').textContent = active
    ? 'token loaded (kept in memory only)'
    : 'no token - register or paste one'
}

// --- registration / login ---------------------------------------------------

async function onRegister(): Promise<void> {
  const name = (el<HTMLInputElement>('team-name')).value.trim()
  try {
    const team = await api.registerTeam(name)
    api.setToken(team.api_token)
    setSessionState(true)
    el('register-result').innerHTML =
      `<div class="banner ok">registered <strong>${team.team_id}</strong>.<br>` +
      `api token (copy it now, it is not shown again): <code>${team.api_token}</code></div>`
    await refreshHistory()
  } catch (err) {
    const message = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err)
    el('register-result').innerHTML = `<div class="banner error">${message}</div>`
  }
}

function onTokenPaste(): void {
  const token = (el<HTMLInputElement>('token-input')).value.trim()
  api.setToken(token || null)
  setSessionState(api.hasToken())
  if (api.hasToken()) void refreshHistory()
}

// --- leaderboards -----------------------------------------------------------

let poller: BoardPoller | null = null

function startPolling(): void {
  poller?.stop()
  const subset = (el<HTMLSelectElement>('board-subset')).value
  const load = subset === 'progress' ? () => api.progressBoard() : () => api.testBoard()
  poller = new BoardPoller(
    load,
    (html) => {
      el('board-table').innerHTML = html
      el('board-updated').textContent = `updated ${new Date().toISOString()}`
    },
    (message) => {
      el('board-updated').textContent = `refresh failed: ${message}`
    },
    Number((el<HTMLInputElement>('poll-interval')).value) * 1000 || 10_000,
  )
  poller.start()
}

// --- upload -----------------------------------------------------------------

async function onUpload(): Promise<void> {
  if (uploadInFlight) return // one in-flight submission per session
  const input = el<HTMLInputElement>('score-file')
  const file = input.files && input.files[0]
  if (!file) {
    show('<div class="banner error">choose a score file first</div>')
    return
  }
  uploadInFlight = true
  el<HTMLButtonElement>('upload-button').disabled = true
  show('<div class="banner">uploading and scoring...</div>')
  try {
    const outcome = await uploadScores(api, file, file.name)
    show(outcome.html)
    if (outcome.kind === 'accepted') {
      await refreshHistory() // new row appears without a reload
    }
  } finally {
    uploadInFlight = false
    el<HTMLButtonElement>('upload-button').disabled = false
  }
}

// --- history + detail -------------------------------------------------------

async function refreshHistory(): Promise<void> {
  if (!api.hasToken()) return
  try {
    const { submissions } = await api.listSubmissions()
    el('history-table').innerHTML =
      '<thead><tr><th>id</th><th>received</th><th>status</th>' +
      '<th>actual</th><th>min</th></tr></thead><tbody>' +
      renderHistory(submissions.slice().reverse()) +
      '</tbody>'
    for (const link of document.querySelectorAll<HTMLAnchorElement>('.detail-link')) {
      link.addEventListener('click', (event) => {
        event.preventDefault()
        void showDetail(link.dataset.id as string)
      })
    }
  } catch (err) {
    if (err instanceof ApiError && err.status === 401) setSessionState(false)
  }
}

async function showDetail(submissionId: string): Promise<void> {
  const sub = await api.getSubmission(submissionId)
  el('detail-title').textContent = `${sub.submission_id} (${sub.status})`
  el('cell-table').innerHTML = sub.progress ? renderCellTable(sub.progress.cells) : ''
  const canvas = el<HTMLCanvasElement>('det-canvas')
  const ctx = canvas.getContext('2d')
  if (!ctx) return
  let model = computeChartModel(null, canvas.width, canvas.height)
  if (sub.status === 'scored') {
    try {
      model = computeChartModel(await api.getDet(submissionId, 'source'),
        canvas.width, canvas.height)
    } catch {
      // keep the placeholder model
    }
  }
  paintChart(ctx, model)
  el('detail-panel').classList.remove('hidden')
}

// --- wiring -----------------------------------------------------------------

export function init(): void {
  el('register-button').addEventListener('click', () => void onRegister())
  el('token-button').addEventListener('click', onTokenPaste)
  el('upload-button').addEventListener('click', () => void onUpload())
  el('board-subset').addEventListener('change', startPolling)
  el('poll-interval').addEventListener('change', startPolling)
  el('history-refresh').addEventListener('click', () => void refreshHistory())
  setSessionState(false)
  startPolling()
}

if (typeof document !== 'undefined' && document.getElementById('board-table')) {
  init()
}
