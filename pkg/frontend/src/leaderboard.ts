/** Leaderboard rendering and the polling loop behind the live view. */

import { costCell, escapeHtml, fmtWhen } from './format.js'
import type { LeaderboardRow, ProgressBoard, TestBoard } from './types.js'

export function renderBoardRows(rows: LeaderboardRow[]): string {
  if (rows.length === 0) {
    return '<tr><td colspan="5" class="placeholder">no submissions yet</td></tr>'
  }
  return rows
    .map(
      (row, i) => `<tr>
  <td>${i + 1}</td>
  <td>${escapeHtml(row.name)}</td>
  ${costCell(row.best_actual)}
  ${costCell(row.best_min)}
  <td class="num">${row.n_submissions}</td>
</tr>`,
    )
    .join('\n')
}

export function renderBoard(board: ProgressBoard | TestBoard): string {
  const caption =
    board.subset === 'progress'
      ? 'Progress (live)'
      : board.snapshot_id
        ? `Test snapshot ${escapeHtml(board.snapshot_id)} - published ${fmtWhen(board.published_at)}`
        : 'Test - no snapshot published yet'
  return `<caption>${caption}</caption>
<thead><tr><th>#</th><th>team</th><th>best actual</th><th>best min</th><th>subs</th></tr></thead>
<tbody>
${renderBoardRows(board.rows)}
</tbody>`
}

/** Polls a board endpoint; the next tick after a change re-renders it. */
export class BoardPoller {
  private timer: ReturnType<typeof setInterval> | null = null

  constructor(
    private readonly load: () => Promise<ProgressBoard | TestBoard>,
    private readonly onUpdate: (html: string) => void,
    private readonly onError: (message: string) => void = () => undefined,
    readonly intervalMs = 10_000,
  ) {}

  async tick(): Promise<void> {
    try {
      this.onUpdate(renderBoard(await this.load()))
    } catch (err) {
      this.onError(err instanceof Error ? err.message : String(err))
    }
  }

  start(): void {
    void this.tick()
    this.timer = setInterval(() => void this.tick(), this.intervalMs)
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer)
      this.timer = null
    }
  }
}
