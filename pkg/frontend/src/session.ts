/** What the running page knows about its user.
 *
 * The cookie itself is httponly, so across a reload the page recalls its
 * identity from sessionStorage and lets the next API call prove whether
 * the cookie still backs it up. Selections live here too: a checkbox
 * ticked on page 1 has to stay ticked while the table walks on.
 */

import type { GroupWire } from "./wire";

const GROUP_KEY = "elab_group";
const SELECT_KEY = "elab_selection";

function readStore(key: string): string | null {
  try {
    return window.sessionStorage.getItem(key);
  } catch {
    return null;
  }
}

function writeStore(key: string, value: string | null): void {
  try {
    if (value === null) window.sessionStorage.removeItem(key);
    else window.sessionStorage.setItem(key, value);
  } catch {
    // Storage can be unavailable (private windows); state then lives for the page only.
  }
}

export interface SelectedDataset {
  lfn: string;
  detector: string;
  school: string;
}

export class SessionState {
  group: GroupWire | null = null;
  /** lfn -> row summary, in the order the user ticked them. */
  readonly selections = new Map<string, SelectedDataset>();
  /** Draft form text per study, so switching views does not lose typing. */
  readonly drafts = new Map<string, Record<string, string>>();

  restore(): void {
    const rawGroup = readStore(GROUP_KEY);
    if (rawGroup) {
      try {
        this.group = JSON.parse(rawGroup) as GroupWire;
      } catch {
        writeStore(GROUP_KEY, null);
      }
    }
    const rawSelection = readStore(SELECT_KEY);
    if (rawSelection) {
      try {
        for (const item of JSON.parse(rawSelection) as SelectedDataset[]) {
          this.selections.set(item.lfn, item);
        }
      } catch {
        writeStore(SELECT_KEY, null);
      }
    }
  }

  signIn(group: GroupWire): void {
    this.group = group;
    writeStore(GROUP_KEY, JSON.stringify(group));
  }

  signOut(): void {
    this.group = null;
    this.selections.clear();
    this.drafts.clear();
    writeStore(GROUP_KEY, null);
    writeStore(SELECT_KEY, null);
  }

  get authenticated(): boolean {
    return this.group !== null;
  }

  get role(): string {
    return this.group?.role ?? "";
  }

  toggleSelection(item: SelectedDataset, on: boolean): void {
    if (on) this.selections.set(item.lfn, item);
    else this.selections.delete(item.lfn);
    writeStore(SELECT_KEY, JSON.stringify([...this.selections.values()]));
  }

  isSelected(lfn: string): boolean {
    return this.selections.has(lfn);
  }

  selectedLfns(): string[] {
    return [...this.selections.keys()];
  }
}
