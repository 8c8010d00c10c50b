/**
 * Session state: the learned instruction in use and the attempt history.
 *
 * History is append-only; entries are frozen and the getter returns a
 * fresh array, so nothing the UI does can rewrite a past attempt.
 */

import type { Sidecar } from "./api.js";

export interface HistoryEntry {
  jobId: string;
  testImageName: string;
  extraText: string;
  textScale: number;
  imageScale: number;
  noiseMode: string;
  /** URL the result thumbnail renders from. */
  imageUrl: string;
  sidecar: Sidecar;
}

export class SessionState {
  private instructionId: string | null = null;
  private readonly entries: HistoryEntry[] = [];
  private readonly listeners = new Set<() => void>();

  get currentInstructionId(): string | null {
    return this.instructionId;
  }

  setInstruction(id: string): void {
    this.instructionId = id;
    this.notify();
  }

  get history(): readonly HistoryEntry[] {
    return [...this.entries];
  }

  appendHistory(entry: HistoryEntry): void {
    this.entries.push(Object.freeze({ ...entry }));
    this.notify();
  }

  /** Subscribe to changes; returns the unsubscribe function. */
  onChange(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }
}
