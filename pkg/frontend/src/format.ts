// Display formatting only. Values arrive fully computed from the API;
// nothing here does probability arithmetic.

export function fmtNumber(value: number | null | undefined, digits = 4): string {
  if (value === null || value === undefined || Number.isNaN(value)) return "–";
  if (value === 0) return "0";
  const magnitude = Math.abs(value);
  if (magnitude >= 1e5 || magnitude < 1e-3) return value.toExponential(Math.max(digits - 1, 1));
  return value.toPrecision(digits).replace(/\.?0+$/, "");
}

export function fmtDelta(value: number | null | undefined): string {
  if (value === null || value === undefined) return "–";
  const text = fmtNumber(value);
  return value > 0 ? `+${text}` : text;
}

export function fmtEvidence(value: unknown): string {
  if (Array.isArray(value)) return `[${value[0]}, ${value[1]}]`;
  return String(value);
}

export const KIND_COLORS: Record<string, string> = {
  labelled: "#8e6fb8",
  boolean: "#c26a4a",
  ranked: "#3f8f6b",
  integer: "#3c6fb0",
  continuous: "#2b8a9e",
};
