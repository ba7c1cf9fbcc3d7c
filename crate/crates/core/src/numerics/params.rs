use crate::error::{Error, Result};

/// Anything made of named `f64` arrays. `arrays` and `arrays_mut` must list
/// the same arrays in the same order; that order defines the flat layout
/// used by optimizers, gradient checks and checkpoints. Gradient containers
/// reuse the parameter type, so their layout is identical by construction.
pub trait Params {
    fn arrays(&self) -> Vec<(String, &[f64])>;
    fn arrays_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.arrays().iter().map(|(_, a)| a.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutEntry {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub entries: Vec<LayoutEntry>,
}

impl ParamLayout {
    pub fn total(&self) -> usize {
        self.entries.last().map_or(0, |e| e.offset + e.len)
    }

    /// Name of the array holding flat offset `offset`, and the index within it.
    pub fn locate(&self, offset: usize) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|e| offset >= e.offset && offset < e.offset + e.len)
            .map(|e| (e.name.as_str(), offset - e.offset))
    }
}

/// Flat copy of a parameter set together with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatParams {
    pub values: Vec<f64>,
    pub layout: ParamLayout,
}

impl FlatParams {
    pub fn of<P: Params + ?Sized>(p: &P) -> Self {
        Self {
            values: flatten(p),
            layout: layout(p),
        }
    }
}

pub fn layout<P: Params + ?Sized>(p: &P) -> ParamLayout {
    let mut offset = 0;
    let entries = p
        .arrays()
        .into_iter()
        .map(|(name, a)| {
            let e = LayoutEntry {
                name,
                offset,
                len: a.len(),
            };
            offset += a.len();
            e
        })
        .collect();
    ParamLayout { entries }
}

pub fn flatten<P: Params + ?Sized>(p: &P) -> Vec<f64> {
    let arrays = p.arrays();
    let mut out = Vec::with_capacity(arrays.iter().map(|(_, a)| a.len()).sum());
    for (_, a) in arrays {
        out.extend_from_slice(a);
    }
    out
}

pub fn unflatten<P: Params + ?Sized>(p: &mut P, flat: &[f64]) -> Result<()> {
    let mut arrays = p.arrays_mut();
    let total: usize = arrays.iter().map(|a| a.len()).sum();
    if total != flat.len() {
        return Err(Error::shape("unflatten", total, flat.len()));
    }
    let mut offset = 0;
    for a in arrays.iter_mut() {
        a.copy_from_slice(&flat[offset..offset + a.len()]);
        offset += a.len();
    }
    Ok(())
}

/// Prefixes every array name of `inner` with `prefix.`.
pub(crate) fn prefixed<'a>(
    prefix: &str,
    inner: Vec<(String, &'a [f64])>,
) -> impl Iterator<Item = (String, &'a [f64])> + 'a {
    let prefix = prefix.to_string();
    inner.into_iter().map(move |(n, a)| (format!("{prefix}.{n}"), a))
}

/// `dst += src`, array by array. Both sides must share a layout.
pub(crate) fn accumulate<P: Params + ?Sized>(dst: &mut P, src: &P) {
    let src = src.arrays();
    for (d, (_, s)) in dst.arrays_mut().into_iter().zip(src) {
        debug_assert_eq!(d.len(), s.len());
        for (a, b) in d.iter_mut().zip(s) {
            *a += b;
        }
    }
}
