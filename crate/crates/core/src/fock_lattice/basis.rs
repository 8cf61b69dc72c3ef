use super::FockError;

/// Largest basis the crate will materialize.
pub const MAX_DIMENSION: usize = 20_000_000;

/// Occupation vectors `(n_0, .., n_{M-1})` with `sum n = N`, in ascending
/// lexicographic order. The rank of a vector is its position in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct FockBasis {
    m: usize,
    n: usize,
    occupations: Vec<u8>,
    /// `prefix[(i, rem, v)] = sum_{u < v} count(M - 1 - i, rem - u)`.
    prefix: Vec<u64>,
}

/// Number of ways to place `r` bosons in `k` modes.
pub fn sector_dimension(k: usize, r: usize) -> Option<u64> {
    if k == 0 {
        return Some(u64::from(r == 0));
    }
    binomial((r + k - 1) as u64, r as u64)
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return None;
        }
    }
    u64::try_from(acc).ok()
}

impl FockBasis {
    pub fn new(m: usize, n: usize) -> Result<Self, FockError> {
        if m == 0 {
            return Err(FockError::Config("lattice needs at least one mode".into()));
        }
        if n > u8::MAX as usize {
            return Err(FockError::Config(format!("{n} particles exceed the occupation range")));
        }
        let dim = sector_dimension(m, n)
            .filter(|&d| d as usize <= MAX_DIMENSION)
            .ok_or(FockError::DimensionTooLarge { m, n })? as usize;
        let stride = n + 1;
        let mut prefix = vec![0u64; m * stride * stride];
        for i in 0..m {
            for rem in 0..=n {
                let mut acc = 0u64;
                for v in 0..=rem {
                    prefix[(i * stride + rem) * stride + v] = acc;
                    acc += sector_dimension(m - 1 - i, rem - v).unwrap_or(0);
                }
            }
        }
        let mut occupations = Vec::with_capacity(dim * m);
        let mut current = vec![0u8; m];
        fill(&mut current, 0, n, &mut occupations);
        debug_assert_eq!(occupations.len(), dim * m);
        Ok(Self {
            m,
            n,
            occupations,
            prefix,
        })
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.occupations.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.occupations.is_empty()
    }

    pub fn state(&self, rank: usize) -> &[u8] {
        &self.occupations[rank * self.m..(rank + 1) * self.m]
    }

    #[inline]
    pub(crate) fn prefix(&self, i: usize, rem: usize, v: usize) -> i64 {
        let stride = self.n + 1;
        self.prefix[(i * stride + rem) * stride + v] as i64
    }

    /// Position of `occ` in the basis; `occ` must sum to `N`.
    pub fn rank(&self, occ: &[u8]) -> usize {
        debug_assert_eq!(occ.len(), self.m);
        let mut rem = self.n;
        let mut r = 0i64;
        for (i, &v) in occ.iter().enumerate() {
            r += self.prefix(i, rem, v as usize);
            rem -= v as usize;
        }
        r as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.occupations.chunks_exact(self.m)
    }
}

fn fill(current: &mut [u8], i: usize, rem: usize, out: &mut Vec<u8>) {
    if i + 1 == current.len() {
        current[i] = rem as u8;
        out.extend_from_slice(current);
        return;
    }
    for v in 0..=rem {
        current[i] = v as u8;
        fill(current, i + 1, rem - v, out);
    }
}
