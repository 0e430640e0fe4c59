export interface DiffToken {
  word: string;
  changed: boolean;
}

export interface TokenDiff {
  gt: DiffToken[];
  pred: DiffToken[];
}

/**
 * Word-level diff between the transcript candidate and the prediction,
 * mirroring the pipeline's word-level WER semantics. A token is marked
 * changed when it is substituted, or exists on one side only; words on
 * an equal alignment step stay unmarked.
 */
export function tokenDiff(gt: string[], pred: string[]): TokenDiff {
  const n = gt.length;
  const m = pred.length;
  // unit-cost edit distance table
  const d: number[][] = Array.from({ length: n + 1 }, (_, i) =>
    Array.from({ length: m + 1 }, (_, j) => (i === 0 ? j : j === 0 ? i : 0)),
  );
  for (let i = 1; i <= n; i++) {
    for (let j = 1; j <= m; j++) {
      const sub = d[i - 1][j - 1] + (gt[i - 1] === pred[j - 1] ? 0 : 1);
      d[i][j] = Math.min(sub, d[i - 1][j] + 1, d[i][j - 1] + 1);
    }
  }

  // Prefer matches, then single-side edits, then substitutions: among
  // the minimum-cost scripts this keeps the most words unmarked.
  const gtOut: DiffToken[] = [];
  const predOut: DiffToken[] = [];
  let i = n;
  let j = m;
  while (i > 0 || j > 0) {
    const equal = i > 0 && j > 0 && gt[i - 1] === pred[j - 1];
    if (equal && d[i][j] === d[i - 1][j - 1]) {
      gtOut.push({ word: gt[i - 1], changed: false });
      predOut.push({ word: pred[j - 1], changed: false });
      i--;
      j--;
    } else if (i > 0 && d[i][j] === d[i - 1][j] + 1) {
      gtOut.push({ word: gt[i - 1], changed: true });
      i--;
    } else if (j > 0 && d[i][j] === d[i][j - 1] + 1) {
      predOut.push({ word: pred[j - 1], changed: true });
      j--;
    } else {
      gtOut.push({ word: gt[i - 1], changed: true });
      predOut.push({ word: pred[j - 1], changed: true });
      i--;
      j--;
    }
  }
  gtOut.reverse();
  predOut.reverse();
  return { gt: gtOut, pred: predOut };
}
