/** Anonymous rater identity: a random token persisted locally. */

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const STORAGE_KEY = "floodbench.rater_id";

export function getRaterId(storage: KeyValueStore): string {
  const existing = storage.getItem(STORAGE_KEY);
  if (existing) return existing;
  const raterId = `rater-${crypto.randomUUID()}`;
  storage.setItem(STORAGE_KEY, raterId);
  return raterId;
}
