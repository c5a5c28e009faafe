/**
 * Item metadata: line-delimited `token<TAB>title<TAB>brand<TAB>description`.
 * Text fields may individually be empty; an all-empty record falls back to
 * the item token as its text (logged by the caller).
 */

export interface ItemMetadata {
  token: string;
  title: string;
  brand: string;
  description: string;
}

export function parseMetadata(content: string): ItemMetadata[] {
  const records: ItemMetadata[] = [];
  const seen = new Set<string>();
  const lines = content.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (line === "") continue;
    const parts = line.split("\t");
    if (parts.length !== 4) {
      throw new Error(`line ${i + 1}: expected 4 tab-separated fields, got ${parts.length}`);
    }
    const [token, title, brand, description] = parts;
    if (!token) throw new Error(`line ${i + 1}: empty item token`);
    if (seen.has(token)) throw new Error(`line ${i + 1}: duplicate item token ${token}`);
    seen.add(token);
    records.push({ token, title, brand, description });
  }
  return records;
}

/** Fixed concatenation order title, brand, description, joined by ". ". */
export function assembleText(item: ItemMetadata): { text: string; usedFallback: boolean } {
  const fields = [item.title, item.brand, item.description].filter((f) => f.length > 0);
  if (fields.length === 0) {
    return { text: item.token, usedFallback: true };
  }
  return { text: fields.join(". "), usedFallback: false };
}
