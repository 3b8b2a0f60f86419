/** Inverse standard normal CDF, used only to place probability-labeled
 *  axis ticks on normal-deviate chart axes. Every plotted data coordinate
 *  comes probit-transformed from the API payload. */

const A = [-39.69683028665376, 220.9460984245205, -275.9285104469687,
  138.357751867269, -30.66479806614716, 2.506628277459239]
const B = [-54.47609879822406, 161.5858368580409, -155.6989798598866,
  66.80131188771972, -13.28068155288572]
const C = [-0.007784894002430293, -0.3223964580411365, -2.400758277161838,
  -2.549732539343734, 4.374664141464968, 2.938163982698783]
const D = [0.007784695709041462, 0.3224671290700398, 2.445134137142996,
  3.754408661907416]
const P_LOW = 0.02425

export function probit(p: number): number {
  if (!(p > 0 && p < 1)) throw new RangeError(`probit domain is (0, 1), got ${p}`)
  if (p > 0.5) return -probit(1 - p)
  let q: number
  if (p < P_LOW) {
    q = Math.sqrt(-2 * Math.log(p))
    return (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) /
      ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1)
  }
  q = p - 0.5
  const r = q * q
  return (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q /
    (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1)
}

/** Standard DET tick probabilities, filtered to the visible range. */
export const TICK_PROBS = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05,
  0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99]

export function tickLabel(p: number): string {
  return p < 0.01 ? `${(p * 100).toFixed(1)}%` : `${Math.round(p * 100)}%`
}
