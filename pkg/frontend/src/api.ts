/** Thin fetch wrappers over the annotation service API. */

import { Answers, Schema, Violation } from "./validation.js";

export interface MessageRecord {
  id: string;
  author_id: string;
  timestamp: string;
  text: string;
  reply_to_id: string | null;
  mentioned_author_ids: string[];
}

export interface ConversationRecord {
  conversation_id: string;
  topic: string;
  traversal: string;
  messages: MessageRecord[];
}

export interface Progress {
  annotator_id: string;
  assigned: number;
  completed: number;
  open_conversation_id: string | null;
  total_conversations: number;
}

export interface TaskPayload {
  annotator_id: string;
  task: {
    conversation: ConversationRecord;
    target_message_id: string;
    schema_version: number;
  } | null;
  progress: Progress;
}

export interface SubmitResponse {
  accepted: boolean;
  violations: Violation[];
  error: string | null;
}

export interface AgreementRow {
  feature: string;
  kappa: number | null;
  n_pairs: number;
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok && response.status !== 422) {
    throw new Error(`${response.status} ${response.statusText}`);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  async getSchema(): Promise<Schema> {
    return asJson(await fetch(`${this.base}/api/schema`));
  }

  async getTask(annotator: string): Promise<TaskPayload> {
    const query = new URLSearchParams({ annotator });
    return asJson(await fetch(`${this.base}/api/tasks?${query}`));
  }

  async postAnnotation(
    conversationId: string,
    annotatorId: string,
    answers: Answers,
  ): Promise<SubmitResponse> {
    const response = await fetch(`${this.base}/api/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        conversation_id: conversationId,
        annotator_id: annotatorId,
        answers,
      }),
    });
    return asJson(response);
  }

  async getAgreement(): Promise<{ rows: AgreementRow[] }> {
    return asJson(await fetch(`${this.base}/api/agreement`));
  }

  async getConversation(id: string): Promise<ConversationRecord> {
    return asJson(await fetch(`${this.base}/api/conversations/${encodeURIComponent(id)}`));
  }
}
