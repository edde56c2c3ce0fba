//! Binary linear block codes and their multi-dimensional products.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::gf2::Gf2Matrix;
use crate::error::{Error, Result};

/// Largest dimension for which minimum distance is found by enumeration.
pub const MAX_ENUMERATION_K: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearCode {
    generator: Gf2Matrix,
}

impl LinearCode {
    /// A `k x n` generator with full row rank.
    pub fn new(generator: Gf2Matrix) -> Result<Self> {
        if generator.rank() != generator.rows() || generator.rows() > generator.cols() {
            return Err(Error::InvalidInput(format!(
                "generator {}x{} does not have full row rank",
                generator.rows(),
                generator.cols()
            )));
        }
        Ok(Self { generator })
    }

    /// `(n, n-1)` single parity check, systematic.
    pub fn single_parity_check(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("parity-check code needs n >= 2".into()));
        }
        let mut g = Gf2Matrix::zeros(n - 1, n);
        for i in 0..n - 1 {
            g.set(i, i, 1);
            g.set(i, n - 1, 1);
        }
        Self::new(g)
    }

    /// `(n, 1)` repetition code.
    pub fn repetition(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("repetition code needs n >= 1".into()));
        }
        let row = vec![1u8; n];
        Self::new(Gf2Matrix::from_rows(&[&row])?)
    }

    /// Systematic Hamming(7,4).
    pub fn hamming74() -> Self {
        let g = Gf2Matrix::from_rows(&[
            &[1, 0, 0, 0, 1, 1, 0],
            &[0, 1, 0, 0, 1, 0, 1],
            &[0, 0, 1, 0, 0, 1, 1],
            &[0, 0, 0, 1, 1, 1, 1],
        ])
        .unwrap();
        Self::new(g).unwrap()
    }

    pub fn generator(&self) -> &Gf2Matrix {
        &self.generator
    }

    pub fn n(&self) -> usize {
        self.generator.cols()
    }

    pub fn k(&self) -> usize {
        self.generator.rows()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    pub fn encode(&self, u: &[u8]) -> Result<Vec<u8>> {
        self.generator.mul_vec(u)
    }

    pub fn min_distance(&self) -> Result<usize> {
        min_distance(&self.generator)
    }
}

impl fmt::Display for LinearCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.n(), self.k())
    }
}

/// `spc:N`, `rep:N` or `hamming74`.
impl FromStr for LinearCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "hamming74" {
            return Ok(Self::hamming74());
        }
        let parse = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("bad code length in {s:?}")))
        };
        match s.split_once(':') {
            Some(("spc", n)) => Self::single_parity_check(parse(n)?),
            Some(("rep", n)) => Self::repetition(parse(n)?),
            _ => Err(Error::InvalidInput(format!(
                "unknown component code {s:?} (expected spc:N, rep:N or hamming74)"
            ))),
        }
    }
}

/// Minimum Hamming weight over all nonzero codewords.
pub fn min_distance(generator: &Gf2Matrix) -> Result<usize> {
    let k = generator.rows();
    if k > MAX_ENUMERATION_K {
        return Err(Error::TooLargeToEnumerate {
            k,
            limit: MAX_ENUMERATION_K,
        });
    }
    // Gray-code walk: each step XORs a single generator row into the codeword.
    let mut word = vec![0u8; generator.cols()];
    let mut best = usize::MAX;
    for i in 1u64..(1u64 << k) {
        let flip = i.trailing_zeros() as usize;
        for (w, &g) in word.iter_mut().zip(generator.row(flip)) {
            *w ^= g;
        }
        best = best.min(word.iter().filter(|&&b| b == 1).count());
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductParams {
    pub n: usize,
    pub k: usize,
    pub rate: f64,
    /// Present only when `k` is small enough to enumerate.
    pub d: Option<usize>,
}

/// Product of `M >= 1` component codes. Component 1 encodes the fastest
/// (last) axis of the `(k_M, ..., k_1)` message array.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductCode {
    components: Vec<LinearCode>,
}

/// Which axis of a two-dimensional product is encoded first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncodeOrder {
    RowsFirst,
    ColumnsFirst,
}

impl ProductCode {
    pub fn new(components: Vec<LinearCode>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("product code needs at least one component".into()));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[LinearCode] {
        &self.components
    }

    pub fn n(&self) -> usize {
        self.components.iter().map(LinearCode::n).product()
    }

    pub fn k(&self) -> usize {
        self.components.iter().map(LinearCode::k).product()
    }

    pub fn rate(&self) -> f64 {
        self.components.iter().map(LinearCode::rate).product()
    }

    pub fn params(&self) -> ProductParams {
        ProductParams {
            n: self.n(),
            k: self.k(),
            rate: self.rate(),
            d: (self.k() <= MAX_ENUMERATION_K).then(|| min_distance(&self.generator()).unwrap()),
        }
    }

    /// `G_1 ⊗ G_2 ⊗ ... ⊗ G_M`.
    pub fn generator(&self) -> Gf2Matrix {
        let mut g = self.components[0].generator().clone();
        for c in &self.components[1..] {
            g = g.kronecker(c.generator());
        }
        g
    }

    /// Encodes axis by axis: the message is read as a row-major
    /// `(k_M, ..., k_1)` array and component `m` is applied along axis `M - m`.
    /// The flattened result equals `u * (G_M ⊗ ... ⊗ G_1)`.
    pub fn encode(&self, u: &[u8]) -> Result<Vec<u8>> {
        if u.len() != self.k() {
            return Err(Error::Shape(format!(
                "message of length {} for a product code with k = {}",
                u.len(),
                self.k()
            )));
        }
        let m = self.components.len();
        let mut shape: Vec<usize> = self.components.iter().rev().map(LinearCode::k).collect();
        let mut data = u.to_vec();
        for (c, code) in self.components.iter().enumerate() {
            let axis = m - 1 - c;
            data = encode_axis(&data, &shape, axis, code);
            shape[axis] = code.n();
        }
        Ok(data)
    }

    /// Two-component encoding into an `n2 x n1` array: the message is
    /// reshaped to `k2 x k1`, rows are encoded with `C1` and columns with `C2`,
    /// in the requested order.
    pub fn encode_2d(&self, u: &[u8], order: EncodeOrder) -> Result<Gf2Matrix> {
        let [c1, c2] = self.components.as_slice() else {
            return Err(Error::InvalidInput(
                "two-dimensional encoding needs two components".into(),
            ));
        };
        if u.len() != self.k() {
            return Err(Error::Shape(format!(
                "message of length {} for k = {}",
                u.len(),
                self.k()
            )));
        }
        let (k1, k2) = (c1.k(), c2.k());
        let data = match order {
            EncodeOrder::RowsFirst => {
                let rows = encode_axis(u, &[k2, k1], 1, c1);
                encode_axis(&rows, &[k2, c1.n()], 0, c2)
            }
            EncodeOrder::ColumnsFirst => {
                let cols = encode_axis(u, &[k2, k1], 0, c2);
                encode_axis(&cols, &[c2.n(), k1], 1, c1)
            }
        };
        let mut out = Gf2Matrix::zeros(c2.n(), c1.n());
        for (i, &b) in data.iter().enumerate() {
            out.set(i / c1.n(), i % c1.n(), b);
        }
        Ok(out)
    }
}

impl fmt::Display for ProductCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Applies `code` to every fiber of `data` (row-major `shape`) along `axis`.
fn encode_axis(data: &[u8], shape: &[usize], axis: usize, code: &LinearCode) -> Vec<u8> {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let (k, n) = (shape[axis], code.n());
    let mut out = vec![0u8; outer * n * inner];
    let mut fiber = vec![0u8; k];
    for o in 0..outer {
        for i in 0..inner {
            for (j, f) in fiber.iter_mut().enumerate() {
                *f = data[(o * k + j) * inner + i];
            }
            let word = code.encode(&fiber).expect("fiber length equals component k");
            for (j, &b) in word.iter().enumerate() {
                out[(o * n + j) * inner + i] = b;
            }
        }
    }
    out
}

/// Reverses the axis order of a row-major array with the given `dims`.
/// Maps the layout used by [`ProductCode::encode`] onto the index order of
/// `G_1 ⊗ ... ⊗ G_M`, and back.
pub fn reverse_axes<T: Copy>(data: &[T], dims: &[usize]) -> Vec<T> {
    let total: usize = dims.iter().product();
    assert_eq!(data.len(), total, "array length does not match dims");
    let rev: Vec<usize> = dims.iter().rev().copied().collect();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; dims.len()];
    for _ in 0..total {
        // `digits` indexes the reversed array; read the source at the reversed digits.
        let src = digits.iter().rev().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d);
        out.push(data[src]);
        for a in (0..rev.len()).rev() {
            digits[a] += 1;
            if digits[a] < rev[a] {
                break;
            }
            digits[a] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_constructors() {
        let spc = LinearCode::single_parity_check(3).unwrap();
        assert_eq!((spc.n(), spc.k()), (3, 2));
        assert_eq!(spc.min_distance().unwrap(), 2);
        assert_eq!(LinearCode::hamming74().min_distance().unwrap(), 3);
        assert_eq!(LinearCode::repetition(5).unwrap().min_distance().unwrap(), 5);
        assert_eq!(
            "spc:4".parse::<LinearCode>().unwrap(),
            LinearCode::single_parity_check(4).unwrap()
        );
        assert!("golay".parse::<LinearCode>().is_err());
        let dependent = Gf2Matrix::from_rows(&[&[1, 1], &[1, 1]]).unwrap();
        assert!(LinearCode::new(dependent).is_err());
    }

    #[test]
    fn single_component_product() {
        let p = ProductCode::new(vec![LinearCode::hamming74()]).unwrap();
        let params = p.params();
        assert_eq!((params.n, params.k, params.d), (7, 4, Some(3)));
        assert_eq!(p.generator(), *LinearCode::hamming74().generator());
    }

    #[test]
    fn all_zero_message() {
        let p = ProductCode::new(vec![LinearCode::hamming74(), LinearCode::hamming74()]).unwrap();
        assert!(p.encode(&[0; 16]).unwrap().iter().all(|&b| b == 0));
        assert!(p.encode(&[0; 15]).is_err());
    }

    #[test]
    fn reverse_axes_round_trip() {
        let data: Vec<usize> = (0..24).collect();
        let r = reverse_axes(&data, &[2, 3, 4]);
        assert_eq!(r[1], 12); // (0,0,1) in the reversed (4,3,2) layout is (1,0,0) in the source
        assert_eq!(reverse_axes(&r, &[4, 3, 2]), data);
    }

    #[test]
    fn large_k_is_not_enumerated() {
        let c = LinearCode::single_parity_check(6).unwrap();
        let p = ProductCode::new(vec![c.clone(), c]).unwrap();
        assert_eq!(p.params().d, None);
        assert!(matches!(
            min_distance(&p.generator()),
            Err(Error::TooLargeToEnumerate { k: 25, .. })
        ));
    }
}
