use serde::{Deserialize, Serialize};

/// Dense row-major `f64` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `out[r] = x[r] · w (+ bias)` for `rows` rows; `w` is `[in_dim × out_dim]`.
pub(crate) fn matmul(x: &[f64], rows: usize, in_dim: usize, w: &[f64], out_dim: usize, bias: Option<&[f64]>) -> Vec<f64> {
    let mut out = vec![0.0; rows * out_dim];
    for r in 0..rows {
        let o = &mut out[r * out_dim..(r + 1) * out_dim];
        if let Some(b) = bias {
            o.copy_from_slice(b);
        }
        for (k, &xv) in x[r * in_dim..(r + 1) * in_dim].iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &w[k * out_dim..(k + 1) * out_dim];
            for (oj, &wj) in o.iter_mut().zip(wr) {
                *oj += xv * wj;
            }
        }
    }
    out
}

/// Backward of [`matmul`]: accumulates `dw += xᵀ·dy`, `db += Σ dy` and,
/// when given, `dx += dy·wᵀ`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn matmul_backward(
    x: &[f64],
    rows: usize,
    in_dim: usize,
    w: &[f64],
    out_dim: usize,
    dy: &[f64],
    dw: &mut [f64],
    db: Option<&mut [f64]>,
    dx: Option<&mut [f64]>,
) {
    for r in 0..rows {
        let dyr = &dy[r * out_dim..(r + 1) * out_dim];
        for (k, &xv) in x[r * in_dim..(r + 1) * in_dim].iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let dwr = &mut dw[k * out_dim..(k + 1) * out_dim];
            for (d, &g) in dwr.iter_mut().zip(dyr) {
                *d += xv * g;
            }
        }
    }
    if let Some(db) = db {
        for r in 0..rows {
            for (d, &g) in db.iter_mut().zip(&dy[r * out_dim..(r + 1) * out_dim]) {
                *d += g;
            }
        }
    }
    if let Some(dx) = dx {
        for r in 0..rows {
            let dyr = &dy[r * out_dim..(r + 1) * out_dim];
            let dxr = &mut dx[r * in_dim..(r + 1) * in_dim];
            for (k, d) in dxr.iter_mut().enumerate() {
                *d += dot(dyr, &w[k * out_dim..(k + 1) * out_dim]);
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        // [1 2] · [[1 0 1],[0 1 1]] + [0 0 1] = [1 2 4]
        let y = matmul(&[1.0, 2.0], 1, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0], 3, Some(&[0.0, 0.0, 1.0]));
        assert_eq!(y, vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn matmul_backward_matches_definition() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let w = [0.5, -1.0, 2.0, 0.25];
        let dy = [1.0, 0.0, -1.0, 2.0];
        let mut dw = [0.0; 4];
        let mut db = [0.0; 2];
        let mut dx = [0.0; 4];
        matmul_backward(&x, 2, 2, &w, 2, &dy, &mut dw, Some(&mut db), Some(&mut dx));
        // dw = xᵀ dy
        assert_eq!(dw, [1.0 - 3.0, 6.0, 2.0 - 4.0, 8.0]);
        assert_eq!(db, [0.0, 2.0]);
        // dx = dy wᵀ
        assert_eq!(dx, [0.5, 2.0, -0.5 - 2.0, -2.0 + 0.5]);
    }
}
