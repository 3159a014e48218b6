//! Matching of OCR spots against caption text.

use std::collections::HashSet;

/// Lowercases and drops every non-alphanumeric character.
pub fn normalize_for_match(s: &str) -> Vec<char> {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// True if some run of `min_chars` consecutive normalized spot characters
/// also occurs contiguously in the normalized caption. Any longer common run
/// contains such a window, so fixed-length windows suffice.
pub fn spot_matches_caption(spot: &str, caption: &str, min_chars: usize) -> bool {
    let spot = normalize_for_match(spot);
    let caption = normalize_for_match(caption);
    if min_chars == 0 {
        return true;
    }
    if spot.len() < min_chars || caption.len() < min_chars {
        return false;
    }
    let windows: HashSet<&[char]> = caption.windows(min_chars).collect();
    spot.windows(min_chars).any(|w| windows.contains(w))
}
