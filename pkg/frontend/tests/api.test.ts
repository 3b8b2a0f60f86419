import { describe, expect, it } from 'vitest'

import { ApiClient, ApiError } from '../src/api.js'
import { BOARD, SCORED, mockFetch, type RecordedCall } from './fixtures.js'

describe('ApiClient', () => {
  it('sends the bearer token once set', async () => {
    const calls: RecordedCall[] = []
    const api = new ApiClient('', null, mockFetch(
      { 'GET /submissions': () => ({ status: 200, body: { submissions: [SCORED] } }) },
      calls,
    ))
    api.setToken('tok-123')
    await api.listSubmissions()
    const headers = calls[0].init?.headers as Record<string, string>
    expect(headers.Authorization).toBe('Bearer tok-123')
  })

  it('parses board payloads verbatim', async () => {
    const api = new ApiClient('', null, mockFetch({
      'GET /leaderboard/progress': () => ({ status: 200, body: BOARD }),
    }))
    const board = await api.progressBoard()
    expect(board.rows[0].best_actual).toBe(0.2173459918)
    expect(board.rows[1].n_submissions).toBe(1)
  })

  it('maps error payloads onto ApiError with code and detail', async () => {
    const api = new ApiClient('', 'tok', mockFetch({
      'POST /submissions': () => ({
        status: 429,
        body: { code: 'QUOTA_EXCEEDED', message: 'daily submission quota of 3 reached', detail: null },
      }),
    }))
    const err = await api.submitScores(new Blob(['x'])).catch((e) => e)
    expect(err).toBeInstanceOf(ApiError)
    expect(err.code).toBe('QUOTA_EXCEEDED')
    expect(err.status).toBe(429)
    expect(err.message).toContain('quota')
  })

  it('falls back to an HTTP_ code when the body is not JSON', async () => {
    const api = new ApiClient('', null, async () => new Response('boom', { status: 502 }))
    const err = await api.progressBoard().catch((e) => e)
    expect(err.code).toBe('HTTP_502')
  })

  it('addresses snapshot endpoints by id', async () => {
    const calls: RecordedCall[] = []
    const api = new ApiClient('', null, mockFetch(
      { 'GET /leaderboard/test/snap-0002': () => ({ status: 200, body: BOARD }) },
      calls,
    ))
    await api.testBoard('snap-0002')
    expect(calls[0].url).toBe('/leaderboard/test/snap-0002')
  })
})
