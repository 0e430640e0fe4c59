export type ItemStatus = "pending" | "decided";

export type DecisionAction = "accept_gt" | "accept_pred" | "manual" | "reject";

export interface VerifyItem {
  id: string;
  gt: string[];
  pred: string[];
  wer: number;
  start_s: number;
  end_s: number;
  duration_s: number;
  status: ItemStatus;
}

export interface QueueCounts {
  pending: number;
  decided: number;
}

export interface ListResponse {
  items: VerifyItem[];
  page: number;
  pages: number;
  total: number;
  counts: QueueCounts;
}

export interface DecisionRequest {
  item_id: string;
  action: DecisionAction;
  manual_text?: string;
}
