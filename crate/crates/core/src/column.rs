//! Nullable numeric column storage.
//!
//! Cells are 64-bit floats; null is stored as one canonical NaN bit pattern
//! so that column equality (and the bitwise determinism guarantees built on
//! it) can compare raw bits. Every write path canonicalizes: any non-finite
//! value becomes null. Columns therefore contain only finite values or the
//! canonical null.

/// Bit pattern used for null cells (the standard quiet NaN).
const NULL_BITS: u64 = 0x7ff8_0000_0000_0000;

/// Raw cell encoding of null.
pub(crate) const NULL: f64 = f64::from_bits(NULL_BITS);

/// Canonicalize a raw value: finite values pass through, everything else
/// (NaN, ±inf) becomes null.
#[inline]
pub(crate) fn encode(value: f64) -> f64 {
    if value.is_finite() {
        value
    } else {
        NULL
    }
}

#[inline]
pub(crate) fn encode_opt(value: Option<f64>) -> f64 {
    match value {
        Some(v) => encode(v),
        None => NULL,
    }
}

/// A nullable column of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Column(Vec<f64>);

impl Column {
    /// Column of `len` nulls.
    pub fn nulls(len: usize) -> Self {
        Column(vec![NULL; len])
    }

    /// Build from raw values, canonicalizing non-finite cells to null.
    pub fn from_values(values: Vec<f64>) -> Self {
        Column(values.into_iter().map(encode).collect())
    }

    /// Build from optional values.
    pub fn from_opts(values: Vec<Option<f64>>) -> Self {
        Column(values.into_iter().map(encode_opt).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Cell value, `None` when null.
    #[inline]
    pub fn get(&self, row: usize) -> Option<f64> {
        let v = self.0[row];
        if v.is_nan() {
            None
        } else {
            Some(v)
        }
    }

    #[inline]
    pub fn is_null(&self, row: usize) -> bool {
        self.0[row].is_nan()
    }

    /// Raw cells with null encoded as NaN. Useful for tight loops; callers
    /// must treat NaN as null.
    #[inline]
    pub fn raw(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Count of non-null cells.
    pub fn count_non_null(&self) -> usize {
        self.0.iter().filter(|v| !v.is_nan()).count()
    }

    /// Exact bit-level equality, including null positions.
    pub fn bitwise_eq(&self, other: &Column) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub(crate) fn set(&mut self, row: usize, value: Option<f64>) {
        self.0[row] = encode_opt(value);
    }

    pub(crate) fn push(&mut self, value: Option<f64>) {
        self.0.push(encode_opt(value));
    }
}

impl FromIterator<Option<f64>> for Column {
    fn from_iter<T: IntoIterator<Item = Option<f64>>>(iter: T) -> Self {
        Column(iter.into_iter().map(encode_opt).collect())
    }
}
