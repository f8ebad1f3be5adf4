//! Birds-eye-view max-height grid descriptor.
//!
//! A keyframe cloud is reduced to an `m x n` grid over the
//! `2*r_lo x 2*r_la` meter rectangle centered on the camera: rows partition
//! the longitudinal (camera z) axis, columns the lateral (camera x) axis,
//! and each bin stores the maximum height above ground of its points
//! (`h_p = h_c - y`), zero when empty. Rotating the cloud 180 degrees about
//! the camera's vertical axis maps the descriptor exactly to its
//! [`CartContext::double_flip`], which is what makes opposing-viewpoint
//! matching possible.

use crate::mapping::Keyframe;
use crate::scalar::Scalar;
use nalgebra::Point3;

/// Grid geometry. `h_c` is the camera height above ground and has no
/// meaningful default; it must come from calibration or configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorParams {
    /// Longitudinal half-range (meters).
    pub r_lo: f64,
    /// Lateral half-range (meters).
    pub r_la: f64,
    /// Row count (longitudinal bins).
    pub m: usize,
    /// Column count (lateral bins).
    pub n: usize,
    /// Camera height above the ground (meters).
    pub h_c: f64,
}

impl DescriptorParams {
    pub fn with_defaults(h_c: f64) -> Self {
        Self { r_lo: 25.0, r_la: 25.0, m: 25, n: 25, h_c }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.m < 1 || self.n < 1 {
            return Err(format!("grid dimensions must be >= 1, got {}x{}", self.m, self.n));
        }
        if !(self.r_lo > 0.0 && self.r_la > 0.0) {
            return Err(format!("ranges must be positive, got r_lo={} r_la={}", self.r_lo, self.r_la));
        }
        if !self.h_c.is_finite() {
            return Err(format!("h_c must be finite, got {}", self.h_c));
        }
        Ok(())
    }
}

/// Row-major `rows x cols` grid of max heights.
#[derive(Debug, Clone, PartialEq)]
pub struct CartContext<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> CartContext<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "grid dimensions must be >= 1");
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must be rows * cols");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.iter().flatten().copied().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Reverse both axes: `out[i][j] = in[m-1-i][n-1-j]`.
    ///
    /// Row-major double flip is exactly a reversal of the flat buffer.
    pub fn double_flip(&self) -> Self {
        let mut data = self.data.clone();
        data.reverse();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Convert the grid to another scalar type.
    pub fn cast<U: Scalar>(&self) -> CartContext<U> {
        CartContext {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|&v| U::from_f64_lossy(v.to_f64().expect("grid value fits f64")))
                .collect(),
        }
    }
}

/// Bin of a camera-frame point, or `None` when it falls outside the
/// descriptor rectangle (`|z| >= r_lo` or `|x| >= r_la`).
///
/// Row index grows with forward distance z, column index with rightward x;
/// bin edges use the floor convention with clamping at the extreme edge.
pub fn bin_of(point: &Point3<f64>, params: &DescriptorParams) -> Option<(usize, usize)> {
    if point.z.abs() >= params.r_lo || point.x.abs() >= params.r_la {
        return None;
    }
    let row = ((point.z + params.r_lo) * params.m as f64 / (2.0 * params.r_lo)).floor();
    let col = ((point.x + params.r_la) * params.n as f64 / (2.0 * params.r_la)).floor();
    let row = (row as usize).min(params.m - 1);
    let col = (col as usize).min(params.n - 1);
    Some((row, col))
}

/// Build the max-height grid for a keyframe cloud.
///
/// Heights are `h_p = h_c - y`; points below the ground plane (`h_p < 0`)
/// are discarded so that empty bins and zero heights stay unambiguous.
pub fn describe<T: Scalar>(kf: &Keyframe, params: &DescriptorParams) -> CartContext<T> {
    describe_points(&kf.points_cam, params)
}

/// [`describe`] over a bare camera-frame point list.
pub fn describe_points<T: Scalar>(points: &[Point3<f64>], params: &DescriptorParams) -> CartContext<T> {
    let mut grid = CartContext::zeros(params.m, params.n);
    for p in points {
        let h_p = params.h_c - p.y;
        if h_p < 0.0 {
            continue;
        }
        if let Some((row, col)) = bin_of(p, params) {
            let h = T::from_f64_lossy(h_p);
            let cell = &mut grid.data[row * grid.cols + col];
            if h > *cell {
                *cell = h;
            }
        }
    }
    grid
}
