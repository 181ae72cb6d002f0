//! Word-level helpers for packed bit rows (bit `i` of a row lives in word
//! `i / 64` at position `i % 64`).

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// Mask selecting the valid bits of the last word of a `bits`-long row.
pub(crate) fn tail_mask(bits: usize) -> u64 {
    match bits % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

#[inline]
fn word_at(words: &[u64], k: isize) -> u64 {
    if k < 0 || k as usize >= words.len() {
        0
    } else {
        words[k as usize]
    }
}

/// 64 bits of `words` starting at (possibly negative) bit position `start`;
/// positions outside the slice read as zero.
#[inline]
pub(crate) fn get64(words: &[u64], start: isize) -> u64 {
    let q = start.div_euclid(64);
    let r = start.rem_euclid(64) as u32;
    let lo = word_at(words, q) >> r;
    if r == 0 {
        lo
    } else {
        lo | (word_at(words, q + 1) << (64 - r))
    }
}

/// Copies bits `[start, start + len)` of `words` into `out` (resized to fit),
/// zero-filling outside the source and masking the tail.
pub(crate) fn extract_into(words: &[u64], start: isize, len: usize, out: &mut Vec<u64>) {
    let n = words_for(len);
    out.clear();
    out.extend((0..n).map(|w| get64(words, start + 64 * w as isize)));
    if let Some(last) = out.last_mut() {
        *last &= tail_mask(len);
    }
}

pub(crate) fn extract(words: &[u64], start: isize, len: usize) -> Vec<u64> {
    let mut out = Vec::new();
    extract_into(words, start, len, &mut out);
    out
}

pub(crate) fn popcount(words: &[u64]) -> u64 {
    words.iter().map(|w| w.count_ones() as u64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(bits: &[bool], start: isize, len: usize) -> Vec<bool> {
        (0..len as isize)
            .map(|i| {
                let k = start + i;
                k >= 0 && (k as usize) < bits.len() && bits[k as usize]
            })
            .collect()
    }

    fn pack(bits: &[bool]) -> Vec<u64> {
        let mut w = vec![0u64; words_for(bits.len())];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                w[i / 64] |= 1 << (i % 64);
            }
        }
        w
    }

    #[test]
    fn extract_matches_naive_for_offsets() {
        let bits: Vec<bool> = (0..200).map(|i| (i * 7 + i / 3) % 5 < 2).collect();
        let words = pack(&bits);
        for start in [-130isize, -64, -3, 0, 1, 63, 64, 65, 150, 199, 260] {
            for len in [1usize, 5, 64, 65, 130] {
                assert_eq!(
                    extract(&words, start, len),
                    pack(&naive(&bits, start, len)),
                    "start {start} len {len}"
                );
            }
        }
    }
}
