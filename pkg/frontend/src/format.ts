/** Display formatting. Costs keep 4 decimals on screen with the exact
 *  payload value preserved in the element's title attribute. */

export function fmtCost(value: number): string {
  return value.toFixed(4)
}

export function fmtRate(value: number): string {
  return value.toFixed(4)
}

export function fmtWhen(iso: string | null): string {
  if (!iso) return '-'
  return iso.replace('T', ' ').replace(/[+.]\d.*$/, ' UTC')
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
}

/** Cost cell: rounded text, full-precision payload value in the tooltip. */
export function costCell(value: number): string {
  return `<td class="num" title="${value}">${fmtCost(value)}</td>`
}
