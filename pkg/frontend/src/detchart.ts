/** DET chart geometry and painting.
 *
 * computeChartModel() is pure: it maps the API's probit coordinates into
 * pixel space, lays out probability-labeled ticks, and positions the
 * actual/min markers and equi-cost contours the service supplied. The
 * painter just draws the model, so contract tests can verify marker
 * positions without a canvas.
 */

import { probit, TICK_PROBS, tickLabel } from './probit.js'
import type { DetResponse } from './types.js'

export interface Tick {
  pos: number
  label: string
}

export interface ChartSeries {
  group: string
  color: string
  points: { x: number; y: number }[]
}

export interface ChartMarker {
  kind: 'actual' | 'min'
  group: string
  x: number
  y: number
  pFa: number
  pMiss: number
  cNorm: number
}

export interface ChartContour {
  kind: string
  level: number
  points: { x: number; y: number }[]
}

export interface ChartModel {
  width: number
  height: number
  margin: { left: number; right: number; top: number; bottom: number }
  empty: boolean
  xTicks: Tick[]
  yTicks: Tick[]
  series: ChartSeries[]
  markers: ChartMarker[]
  contours: ChartContour[]
  xLabel: string
  yLabel: string
}

const COLORS = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#8c564b']
const MARGIN = { left: 56, right: 12, top: 12, bottom: 44 }

interface Scale {
  lo: number
  hi: number
  toPx(v: number): number
}

function makeScale(lo: number, hi: number, pxLo: number, pxHi: number): Scale {
  const span = hi - lo || 1
  return {
    lo,
    hi,
    toPx: (v: number) => pxLo + ((v - lo) / span) * (pxHi - pxLo),
  }
}

export function computeChartModel(
  det: DetResponse | null,
  width = 520,
  height = 420,
): ChartModel {
  const base: ChartModel = {
    width,
    height,
    margin: MARGIN,
    empty: true,
    xTicks: [],
    yTicks: [],
    series: [],
    markers: [],
    contours: [],
    xLabel: 'false-alarm probability',
    yLabel: 'miss probability',
  }
  if (!det || det.curves.length === 0 || det.curves.every((c) => c.p_fa.length === 0)) {
    return base
  }

  const xs: number[] = []
  const ys: number[] = []
  for (const curve of det.curves) {
    xs.push(...curve.probit_fa)
    ys.push(...curve.probit_miss)
    for (const marker of curve.markers) {
      xs.push(marker.probit_fa)
      ys.push(marker.probit_miss)
    }
  }
  const pad = 0.15
  const xScale = makeScale(Math.min(...xs) - pad, Math.max(...xs) + pad,
    MARGIN.left, width - MARGIN.right)
  const yScale = makeScale(Math.min(...ys) - pad, Math.max(...ys) + pad,
    height - MARGIN.bottom, MARGIN.top)

  const ticksFor = (scale: Scale): Tick[] =>
    TICK_PROBS.map((p) => ({ p, z: probit(p) }))
      .filter(({ z }) => z >= scale.lo && z <= scale.hi)
      .map(({ p, z }) => ({ pos: scale.toPx(z), label: tickLabel(p) }))

  const series: ChartSeries[] = det.curves.map((curve, i) => ({
    group: curve.group,
    color: COLORS[i % COLORS.length],
    points: curve.probit_fa.map((zx, j) => ({
      x: xScale.toPx(zx),
      y: yScale.toPx(curve.probit_miss[j]),
    })),
  }))

  const markers: ChartMarker[] = []
  const contours: ChartContour[] = []
  const seenLevels = new Set<number>()
  for (const curve of det.curves) {
    for (const marker of curve.markers) {
      markers.push({
        kind: marker.kind,
        group: curve.group,
        x: xScale.toPx(marker.probit_fa),
        y: yScale.toPx(marker.probit_miss),
        pFa: marker.p_fa,
        pMiss: marker.p_miss,
        cNorm: marker.c_norm,
      })
    }
    for (const contour of curve.contours) {
      if (seenLevels.has(contour.level)) continue
      seenLevels.add(contour.level)
      contours.push({
        kind: contour.kind,
        level: contour.level,
        points: contour.probit_fa
          .map((zx, j) => ({ x: zx, y: contour.probit_miss[j] }))
          .filter((pt) => pt.x >= xScale.lo && pt.x <= xScale.hi
            && pt.y >= yScale.lo && pt.y <= yScale.hi)
          .map((pt) => ({ x: xScale.toPx(pt.x), y: yScale.toPx(pt.y) })),
      })
    }
  }

  return {
    ...base,
    empty: false,
    xTicks: ticksFor(xScale),
    yTicks: ticksFor(yScale),
    series,
    markers,
    contours,
  }
}

/** Minimal 2D-context surface the painter needs (test doubles implement it). */
export interface PaintContext {
  clearRect(x: number, y: number, w: number, h: number): void
  beginPath(): void
  moveTo(x: number, y: number): void
  lineTo(x: number, y: number): void
  arc(x: number, y: number, r: number, a0: number, a1: number): void
  stroke(): void
  fill(): void
  fillText(text: string, x: number, y: number): void
  save(): void
  restore(): void
  translate(x: number, y: number): void
  rotate(rad: number): void
  strokeStyle: string | CanvasGradient | CanvasPattern
  fillStyle: string | CanvasGradient | CanvasPattern
  lineWidth: number
  font: string
  textAlign: CanvasTextAlign
}

export function paintChart(ctx: PaintContext, model: ChartModel): void {
  ctx.clearRect(0, 0, model.width, model.height)
  ctx.font = '12px system-ui, sans-serif'
  if (model.empty) {
    ctx.fillStyle = '#777'
    ctx.textAlign = 'center'
    ctx.fillText('no curve data yet', model.width / 2, model.height / 2)
    return
  }
  const { left, right, top, bottom } = model.margin
  const plotRight = model.width - right
  const plotBottom = model.height - bottom

  ctx.strokeStyle = '#e3e3e3'
  ctx.lineWidth = 1
  for (const tick of model.xTicks) {
    ctx.beginPath()
    ctx.moveTo(tick.pos, top)
    ctx.lineTo(tick.pos, plotBottom)
    ctx.stroke()
    ctx.fillStyle = '#444'
    ctx.textAlign = 'center'
    ctx.fillText(tick.label, tick.pos, plotBottom + 16)
  }
  for (const tick of model.yTicks) {
    ctx.beginPath()
    ctx.moveTo(left, tick.pos)
    ctx.lineTo(plotRight, tick.pos)
    ctx.stroke()
    ctx.fillStyle = '#444'
    ctx.textAlign = 'right'
    ctx.fillText(tick.label, left - 6, tick.pos + 4)
  }

  for (const contour of model.contours) {
    ctx.strokeStyle = '#222'
    ctx.lineWidth = 1
    ctx.beginPath()
    contour.points.forEach((pt, i) => (i === 0 ? ctx.moveTo(pt.x, pt.y) : ctx.lineTo(pt.x, pt.y)))
    ctx.stroke()
  }

  for (const series of model.series) {
    ctx.strokeStyle = series.color
    ctx.lineWidth = 1.8
    ctx.beginPath()
    series.points.forEach((pt, i) => (i === 0 ? ctx.moveTo(pt.x, pt.y) : ctx.lineTo(pt.x, pt.y)))
    ctx.stroke()
  }

  for (const marker of model.markers) {
    ctx.strokeStyle = '#000'
    ctx.fillStyle = '#000'
    ctx.lineWidth = 1.5
    if (marker.kind === 'min') {
      ctx.beginPath()
      ctx.arc(marker.x, marker.y, 5, 0, 2 * Math.PI)
      ctx.stroke()
    } else {
      ctx.beginPath()
      ctx.moveTo(marker.x - 4, marker.y - 4)
      ctx.lineTo(marker.x + 4, marker.y + 4)
      ctx.moveTo(marker.x - 4, marker.y + 4)
      ctx.lineTo(marker.x + 4, marker.y - 4)
      ctx.stroke()
    }
  }

  ctx.fillStyle = '#222'
  ctx.textAlign = 'center'
  ctx.fillText(model.xLabel, (left + plotRight) / 2, model.height - 8)
  ctx.save()
  ctx.translate(14, (top + plotBottom) / 2)
  ctx.rotate(-Math.PI / 2)
  ctx.fillText(model.yLabel, 0, 0)
  ctx.restore()
}
