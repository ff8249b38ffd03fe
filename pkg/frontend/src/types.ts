/** Payload types mirroring the review API JSON contract. */

export type Dimension =
  | "validity"
  | "suspiciousness"
  | "detectability"
  | "grammaticality"
  | "meaning";

export interface Progress {
  judged: number;
  total: number;
}

export interface ValidityItem {
  item_id: string;
  mode: "validity";
  text: string;
  labels: string[];
  dimensions: Dimension[];
  progress: Progress;
}

export interface SuspiciousnessItem {
  item_id: string;
  mode: "suspiciousness";
  text: string;
  dimensions: Dimension[];
  progress: Progress;
}

export interface Candidate {
  slot: string;
  text: string;
}

export interface DgmItem {
  item_id: string;
  mode: "dgm";
  original: string;
  candidates: Candidate[];
  dimensions: Dimension[];
  progress: Progress;
}

export type SessionItem = ValidityItem | SuspiciousnessItem | DgmItem;

export interface SessionDone {
  done: true;
  progress: Progress;
}

export type SessionResponse = SessionItem | SessionDone;

export function isDone(resp: SessionResponse): resp is SessionDone {
  return (resp as SessionDone).done === true;
}

export type JudgmentValue =
  | { label: number }
  | { computer_altered: boolean }
  | { slot: string };
