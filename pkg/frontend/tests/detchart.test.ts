import { describe, expect, it } from 'vitest'

import { computeChartModel, paintChart, type PaintContext } from '../src/detchart.js'
import { renderCellTable } from '../src/history.js'
import { fmtRate } from '../src/format.js'
import { probit } from '../src/probit.js'
import { DET, SCORED } from './fixtures.js'

describe('probit (axis geometry only)', () => {
  it('matches reference quantiles', () => {
    expect(probit(0.5)).toBe(0)
    expect(probit(0.975)).toBeCloseTo(1.959964, 5)
    expect(probit(0.025)).toBeCloseTo(-1.959964, 5)
  })

  it('rejects the closed endpoints', () => {
    expect(() => probit(0)).toThrow(RangeError)
    expect(() => probit(1)).toThrow(RangeError)
  })
})

describe('computeChartModel', () => {
  const model = computeChartModel(DET, 520, 420)

  it('positions markers exactly where the API payload says', () => {
    expect(model.empty).toBe(false)
    expect(model.markers).toHaveLength(2)
    const payload = DET.curves[0].markers
    for (const [i, marker] of model.markers.entries()) {
      // raw probabilities pass through untouched
      expect(marker.pFa).toBe(payload[i].p_fa)
      expect(marker.pMiss).toBe(payload[i].p_miss)
      expect(marker.cNorm).toBe(payload[i].c_norm)
      // pixel position is the pure axis transform of the payload's probit
      // coordinates: invert it and compare
      const first = model.series[0].points[0]
      const zx0 = DET.curves[0].probit_fa[0]
      const zy0 = DET.curves[0].probit_miss[0]
      const second = model.series[0].points[1]
      const zx1 = DET.curves[0].probit_fa[1]
      const zy1 = DET.curves[0].probit_miss[1]
      const invX = zx0 + ((marker.x - first.x) / (second.x - first.x)) * (zx1 - zx0)
      const invY = zy0 + ((marker.y - first.y) / (second.y - first.y)) * (zy1 - zy0)
      expect(invX).toBeCloseTo(payload[i].probit_fa, 9)
      expect(invY).toBeCloseTo(payload[i].probit_miss, 9)
    }
  })

  it('draws one series per curve with one point per payload step', () => {
    expect(model.series).toHaveLength(1)
    expect(model.series[0].points).toHaveLength(DET.curves[0].p_fa.length)
  })

  it('keeps the equi-cost contour the service sent', () => {
    expect(model.contours).toHaveLength(1)
    expect(model.contours[0].level).toBe(DET.curves[0].contours[0].level)
    expect(model.contours[0].points.length).toBeGreaterThan(0)
  })

  it('labels ticks in probability with probit-transformed positions', () => {
    expect(model.xTicks.length).toBeGreaterThan(2)
    const labels = model.xTicks.map((t) => t.label)
    expect(labels).toContain('1%')
    // positions strictly increase with probability
    const positions = model.xTicks.map((t) => t.pos)
    expect([...positions].sort((a, b) => a - b)).toEqual(positions)
  })

  it('null / empty data produces the placeholder state', () => {
    expect(computeChartModel(null).empty).toBe(true)
    expect(
      computeChartModel({ submission_id: 's', by: 'all', beta: 19, curves: [] }).empty,
    ).toBe(true)
  })
})

describe('paintChart', () => {
  function recordingContext(): { ctx: PaintContext; ops: string[]; texts: string[] } {
    const ops: string[] = []
    const texts: string[] = []
    const ctx: PaintContext = {
      clearRect: () => ops.push('clear'),
      beginPath: () => ops.push('begin'),
      moveTo: () => ops.push('move'),
      lineTo: () => ops.push('line'),
      arc: () => ops.push('arc'),
      stroke: () => ops.push('stroke'),
      fill: () => ops.push('fill'),
      fillText: (text) => texts.push(text),
      save: () => ops.push('save'),
      restore: () => ops.push('restore'),
      translate: () => ops.push('translate'),
      rotate: () => ops.push('rotate'),
      strokeStyle: '',
      fillStyle: '',
      lineWidth: 1,
      font: '',
      textAlign: 'left',
    }
    return { ctx, ops, texts }
  }

  it('draws the min marker as a circle and the actual marker as a cross', () => {
    const { ctx, ops } = recordingContext()
    paintChart(ctx, computeChartModel(DET))
    expect(ops.filter((o) => o === 'arc')).toHaveLength(1)
    expect(ops.filter((o) => o === 'stroke').length).toBeGreaterThan(3)
  })

  it('placeholder state paints a message and nothing else', () => {
    const { ctx, ops, texts } = recordingContext()
    paintChart(ctx, computeChartModel(null))
    expect(texts).toEqual(['no curve data yet'])
    expect(ops.filter((o) => o === 'stroke')).toHaveLength(0)
  })
})

describe('per-cell cost table', () => {
  it('shows the payload numbers verbatim', () => {
    const cells = SCORED.progress!.cells
    const html = renderCellTable(cells)
    for (const cell of cells) {
      expect(html).toContain(`title="${cell.p_miss}"`)
      expect(html).toContain(`title="${cell.p_fa}"`)
      expect(html).toContain(`title="${cell.c_norm}"`)
      expect(html).toContain(fmtRate(cell.p_miss))
      expect(html).toContain(`>${cell.n_target}</td>`)
    }
  })
})
