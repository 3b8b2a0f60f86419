/** Payload shapes of the evaluation service API. The client renders these
 *  verbatim; it never derives a cost or error rate itself. */

export interface TeamCredentials {
  team_id: string
  name: string
  api_token: string
  registered_at: string
}

export interface CellCost {
  source: string
  gender: string
  n_enroll: number
  p_miss: number
  p_fa: number
  c_norm: number
  n_target: number
  n_nontarget: number
}

export interface SubsetScores {
  actual: number
  min_cost: number
  cells: CellCost[]
}

export interface RejectionDetail {
  summary: string
  missing: [string, string][]
  extra: [string, string][]
  n_missing: number
  n_extra: number
}

export interface SubmissionView {
  submission_id: string
  team_id: string
  received_at: string
  status: 'scored' | 'rejected'
  progress: SubsetScores | null
  rejection: RejectionDetail | null
}

export interface LeaderboardRow {
  team_id: string
  name: string
  best_actual: number
  best_min: number
  best_submission_id: string
  n_submissions: number
}

export interface ProgressBoard {
  subset: 'progress'
  rows: LeaderboardRow[]
}

export interface TestBoard {
  subset: 'test'
  snapshot_id: string | null
  published_at: string | null
  rows: LeaderboardRow[]
}

export interface DetMarker {
  kind: 'actual' | 'min'
  theta: number | null
  p_fa: number
  p_miss: number
  c_norm: number
  probit_fa: number
  probit_miss: number
}

export interface DetContour {
  level: number
  kind: string
  p_fa: number[]
  p_miss: number[]
  probit_fa: number[]
  probit_miss: number[]
}

export interface DetCurvePayload {
  group: string
  theta: (number | null)[]
  p_fa: number[]
  p_miss: number[]
  probit_fa: number[]
  probit_miss: number[]
  markers: DetMarker[]
  contours: DetContour[]
}

export interface DetResponse {
  submission_id: string
  by: string
  beta: number
  curves: DetCurvePayload[]
}

export interface ApiErrorBody {
  code: string
  message: string
  detail: unknown
}
