/** Canned API payloads (shapes copied from the service) and a fetch mock. */

import type { FetchLike } from '../src/api.js'
import type {
  DetResponse,
  ProgressBoard,
  SubmissionView,
  TestBoard,
} from '../src/types.js'

// sentinel decimals: nothing in the client could plausibly recompute these
export const BOARD: ProgressBoard = {
  subset: 'progress',
  rows: [
    {
      team_id: 'team-0001',
      name: 'alpha',
      best_actual: 0.2173459918,
      best_min: 0.1912837465,
      best_submission_id: 'sub-000002',
      n_submissions: 3,
    },
    {
      team_id: 'team-0002',
      name: 'beta',
      best_actual: 0.3591236704,
      best_min: 0.3107645881,
      best_submission_id: 'sub-000004',
      n_submissions: 1,
    },
  ],
}

export const TEST_BOARD: TestBoard = {
  subset: 'test',
  snapshot_id: 'snap-0001',
  published_at: '2026-08-01T12:00:00+00:00',
  rows: BOARD.rows,
}

export const SCORED: SubmissionView = {
  submission_id: 'sub-000002',
  team_id: 'team-0001',
  received_at: '2026-08-01T10:30:00+00:00',
  status: 'scored',
  progress: {
    actual: 0.2173459918,
    min_cost: 0.1912837465,
    cells: [
      {
        source: 'CMN2', gender: 'male', n_enroll: 1,
        p_miss: 0.1234567891, p_fa: 0.0049382716, c_norm: 0.2172839495,
        n_target: 81, n_nontarget: 2430,
      },
      {
        source: 'MLS', gender: 'female', n_enroll: 3,
        p_miss: 0.0918273645, p_fa: 0.0066778899, c_norm: 0.2187072726,
        n_target: 109, n_nontarget: 3300,
      },
    ],
  },
  rejection: null,
}

export const DET: DetResponse = {
  submission_id: 'sub-000002',
  by: 'source',
  beta: 19.0,
  curves: [
    {
      group: 'CMN2',
      theta: [null, 0.5, null],
      p_fa: [0.001, 0.02, 0.31],
      p_miss: [0.62, 0.2, 0.015],
      probit_fa: [-3.0902323061678132, -2.0537489106318225, -0.4958503473474533],
      probit_miss: [0.30548078809865064, -0.8416212335729143, -2.1700903775845606],
      markers: [
        {
          kind: 'actual', theta: 2.9444389791664403,
          p_fa: 0.0123456789, p_miss: 0.2468013579, c_norm: 0.4813692571,
          probit_fa: -2.2475292430765154, probit_miss: -0.6844033471719404,
        },
        {
          kind: 'min', theta: 1.25,
          p_fa: 0.0192837465, p_miss: 0.1827364554, c_norm: 0.5491276389,
          probit_fa: -2.0697598371421497, probit_miss: -0.9044146137500524,
        },
      ],
      contours: [
        {
          level: 0.4813692571,
          kind: 'actual',
          p_fa: [0.0, 0.0126676120289474, 0.025335224057894745],
          p_miss: [0.4813692571, 0.2406846285, 0.0],
          probit_fa: [-3.5, -2.2370432067449157, -1.9541418843347349],
          probit_miss: [-0.046727697354758564, -0.7037267657058072, -3.2],
        },
      ],
    },
  ],
}

export interface RecordedCall {
  url: string
  init: RequestInit | undefined
}

export function mockFetch(
  routes: Record<string, () => { status: number; body: unknown }>,
  calls: RecordedCall[] = [],
): FetchLike {
  return async (url, init) => {
    calls.push({ url, init })
    const key = `${init?.method ?? 'GET'} ${url.split('?')[0]}`
    const route = routes[key]
    if (!route) {
      return new Response(JSON.stringify({ code: 'NOT_FOUND', message: `no route ${key}` }), {
        status: 404,
        headers: { 'content-type': 'application/json' },
      })
    }
    const { status, body } = route()
    return new Response(JSON.stringify(body), {
      status,
      headers: { 'content-type': 'application/json' },
    })
  }
}
