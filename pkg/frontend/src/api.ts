/** Thin typed client over the service API. All numbers displayed anywhere
 *  in the UI come out of these payloads untouched. */

import type {
  DetResponse,
  ProgressBoard,
  RejectionDetail,
  SubmissionView,
  TeamCredentials,
  TestBoard,
} from './types.js'

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
    public readonly detail: unknown = null,
  ) {
    super(message)
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private token: string | null = null,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token
  }

  hasToken(): boolean {
    return this.token !== null && this.token !== ''
  }

  private headers(): Record<string, string> {
    return this.token ? { Authorization: `Bearer ${this.token}` } : {}
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      ...init,
      headers: { ...this.headers(), ...(init.headers ?? {}) },
    })
    const body = await response.json().catch(() => null)
    if (!response.ok) {
      const code = (body && body.code) || `HTTP_${response.status}`
      const message = (body && body.message) || response.statusText
      throw new ApiError(code, message, response.status, body ? body.detail : null)
    }
    return body as T
  }

  registerTeam(name: string): Promise<TeamCredentials> {
    return this.request('/teams', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ name }),
    })
  }

  submitScores(file: Blob, filename = 'scores.tsv'): Promise<SubmissionView> {
    const form = new FormData()
    form.append('file', file, filename)
    return this.request('/submissions', { method: 'POST', body: form })
  }

  listSubmissions(): Promise<{ submissions: SubmissionView[] }> {
    return this.request('/submissions')
  }

  getSubmission(id: string): Promise<SubmissionView> {
    return this.request(`/submissions/${id}`)
  }

  getDet(id: string, by: 'source' | 'all' = 'source'): Promise<DetResponse> {
    return this.request(`/submissions/${id}/det?by=${by}`)
  }

  progressBoard(): Promise<ProgressBoard> {
    return this.request('/leaderboard/progress')
  }

  testBoard(snapshotId?: string): Promise<TestBoard> {
    return this.request(
      snapshotId ? `/leaderboard/test/${snapshotId}` : '/leaderboard/test',
    )
  }
}

export function isRejection(detail: unknown): detail is RejectionDetail {
  return !!detail && typeof detail === 'object' && 'n_missing' in (detail as object)
}
