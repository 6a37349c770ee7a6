use serde::{Deserialize, Serialize};

/// A named block inside a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Builds a contiguous layout from `(name, shape)` pairs.
pub fn layout(blocks: &[(&str, Vec<usize>)]) -> Vec<ParamSpec> {
    let mut offset = 0;
    blocks
        .iter()
        .map(|(name, shape)| {
            let spec = ParamSpec {
                name: name.to_string(),
                shape: shape.clone(),
                offset,
            };
            offset += spec.len();
            spec
        })
        .collect()
}

pub fn total_len(layout: &[ParamSpec]) -> usize {
    layout.last().map(|s| s.offset + s.len()).unwrap_or(0)
}

/// Euclidean norm.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales `grad` so its norm is at most `max_norm`. Returns the norm
/// before clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let n = l2_norm(grad);
    if n > max_norm {
        let s = max_norm / n;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_offsets() {
        let l = layout(&[("w", vec![3, 2]), ("b", vec![2])]);
        assert_eq!(l[1].offset, 6);
        assert_eq!(total_len(&l), 8);
        assert_eq!(l[0].range(), 0..6);
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((l2_norm(&g) - 1.0).abs() < 1e-15);
        let mut small = vec![0.1];
        clip_global_norm(&mut small, 5.0);
        assert_eq!(small, vec![0.1]);
    }
}
