/** Own-submission history list and the per-cell cost breakdown table. */

import { costCell, escapeHtml, fmtRate, fmtWhen } from './format.js'
import type { CellCost, SubmissionView } from './types.js'

export function renderHistory(subs: SubmissionView[]): string {
  if (subs.length === 0) {
    return '<tr><td colspan="5" class="placeholder">no submissions yet</td></tr>'
  }
  return subs
    .map((sub) => {
      const actual = sub.progress ? costCell(sub.progress.actual) : '<td>-</td>'
      const min = sub.progress ? costCell(sub.progress.min_cost) : '<td>-</td>'
      return `<tr data-submission="${sub.submission_id}" class="${sub.status}">
  <td><a href="#" class="detail-link" data-id="${sub.submission_id}">${sub.submission_id}</a></td>
  <td>${fmtWhen(sub.received_at)}</td>
  <td>${sub.status}</td>
  ${actual}
  ${min}
</tr>`
    })
    .join('\n')
}

export function renderCellTable(cells: CellCost[]): string {
  const rows = cells
    .map(
      (cell) => `<tr>
  <td>${escapeHtml(cell.source)}</td>
  <td>${escapeHtml(cell.gender)}</td>
  <td class="num">${cell.n_enroll}</td>
  <td class="num" title="${cell.p_miss}">${fmtRate(cell.p_miss)}</td>
  <td class="num" title="${cell.p_fa}">${fmtRate(cell.p_fa)}</td>
  ${costCell(cell.c_norm)}
  <td class="num">${cell.n_target}</td>
  <td class="num">${cell.n_nontarget}</td>
</tr>`,
    )
    .join('\n')
  return `<thead><tr><th>source</th><th>gender</th><th>#enroll</th><th>p_miss</th>
<th>p_fa</th><th>c_norm</th><th>#tgt</th><th>#non</th></tr></thead>
<tbody>
${rows}
</tbody>`
}
