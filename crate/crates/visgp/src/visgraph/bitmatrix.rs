//! Compact symmetric adjacency storage: one bit per ordered pair.

/// Row-major packed bit matrix over `n` vertices. Callers maintain symmetry
/// through [`BitMatrix::set_sym`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        let words_per_row = n.div_ceil(64);
        Self {
            n,
            words_per_row,
            bits: vec![0; n * words_per_row],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words_per_row + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words_per_row + j / 64] |= 1 << (j % 64);
    }

    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize) {
        debug_assert_ne!(i, j, "no self loops");
        self.set(i, j);
        self.set(j, i);
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn row_indices(&self, i: usize) -> Vec<usize> {
        self.row_indices_from(i, 0)
    }

    /// Set bits of row `i` with index >= `start`.
    pub fn row_indices_from(&self, i: usize, start: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let row = self.row(i);
        for (wi, &word) in row.iter().enumerate() {
            let mut w = word;
            if wi * 64 + 63 < start {
                continue;
            }
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                let idx = wi * 64 + b;
                if idx >= start {
                    out.push(idx);
                }
                w &= w - 1;
            }
        }
        out
    }

    /// True when every set bit of `sub`'s row-set `a` is also set in `sup`.
    pub fn row_is_subset(a: &[u64], b: &[u64]) -> bool {
        a.iter().zip(b).all(|(x, y)| x & !y == 0)
    }

    /// Raw packed bytes, row-major with each row padded to whole bytes
    /// (`ceil(n/8)` bytes per row) — the adjacency cache layout.
    pub fn to_row_major_bytes(&self) -> Vec<u8> {
        let bytes_per_row = self.n.div_ceil(8);
        let mut out = vec![0u8; self.n * bytes_per_row];
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) {
                    out[i * bytes_per_row + j / 8] |= 1 << (j % 8);
                }
            }
        }
        out
    }

    pub fn from_row_major_bytes(n: usize, data: &[u8]) -> Option<Self> {
        let bytes_per_row = n.div_ceil(8);
        if data.len() != n * bytes_per_row {
            return None;
        }
        let mut m = Self::new(n);
        for i in 0..n {
            for j in 0..n {
                if data[i * bytes_per_row + j / 8] >> (j % 8) & 1 == 1 {
                    m.set(i, j);
                }
            }
        }
        Some(m)
    }
}
