//! Physical line splitting shared by the corpus and the lexer.
//!
//! Line terminators are `\n`, `\r\n` and a lone `\r`. A trailing terminator
//! does not open an extra empty line, so `"a\nb\n"` has two lines and the empty
//! string has none.

use alloc::vec::Vec;

/// `(byte offset, length)` of every line, terminators excluded.
pub fn line_index(content: &str) -> Vec<(usize, usize)> {
    let bytes = content.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\n' => {
                out.push((start, i - start));
                i += 1;
                start = i;
            }
            b'\r' => {
                out.push((start, i - start));
                i += if bytes.get(i + 1) == Some(&b'\n') { 2 } else { 1 };
                start = i;
            }
            _ => i += 1,
        }
    }
    if start < bytes.len() {
        out.push((start, bytes.len() - start));
    }
    out
}

/// Slices of every line, terminators excluded.
pub fn split_lines(content: &str) -> Vec<&str> {
    line_index(content)
        .into_iter()
        .map(|(off, len)| &content[off..off + len])
        .collect()
}

/// Number of terminators in `s`, counting `\r\n` once.
pub(crate) fn count_terminators(s: &str) -> usize {
    let bytes = s.as_bytes();
    let mut n = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\n' => n += 1,
            b'\r' => {
                n += 1;
                if bytes.get(i + 1) == Some(&b'\n') {
                    i += 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    n
}
