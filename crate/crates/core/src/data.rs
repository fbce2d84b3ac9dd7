use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `M` samples of `I` views; view `i` is an `M × D_i` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewBatch {
    views: Vec<Matrix>,
}

impl MultiviewBatch {
    pub fn new(views: Vec<Matrix>) -> Result<Self> {
        if views.len() < 2 {
            return Err(Error::TooFewViews(views.len()));
        }
        let m = views[0].rows();
        if views.iter().any(|v| v.rows() != m) {
            return Err(Error::ShapeMismatch("views have different sample counts".into()));
        }
        if m < 2 {
            return Err(Error::TooFewSamples(m));
        }
        if views.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { views })
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, i: usize) -> &Matrix {
        &self.views[i]
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].rows()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.views.iter().map(Matrix::cols).sum()
    }

    /// Sub-batch of the given sample indices (repeats allowed).
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(self.views.iter().map(|v| v.select_rows(idx)).collect())
    }

    /// All views side by side, `M × D`.
    pub fn stacked(&self) -> Matrix {
        let refs: Vec<&Matrix> = self.views.iter().collect();
        Matrix::hstack(&refs)
    }

    /// Representations `Z_i = X_i U_i`.
    pub fn project(&self, weights: &WeightSet) -> Result<Vec<Matrix>> {
        weights.check_dims(&self.dims())?;
        Ok(self
            .views
            .iter()
            .zip(weights.views())
            .map(|(x, u)| x.matmul(u))
            .collect())
    }
}

/// Per-view weights `U_i` (`D_i × K`) with a shared `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    views: Vec<Matrix>,
}

impl WeightSet {
    pub fn new(views: Vec<Matrix>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::TooFewViews(0));
        }
        let k = views[0].cols();
        if views.iter().any(|u| u.cols() != k) {
            return Err(Error::ShapeMismatch("weight matrices have different K".into()));
        }
        Ok(Self { views })
    }

    /// Splits a stacked `D × K` matrix into blocks of the given heights.
    pub fn from_stacked(u: &Matrix, dims: &[usize]) -> Result<Self> {
        if dims.iter().sum::<usize>() != u.rows() {
            return Err(Error::ShapeMismatch(format!(
                "stacked weights have {} rows, views need {}",
                u.rows(),
                dims.iter().sum::<usize>()
            )));
        }
        let mut start = 0;
        let mut views = Vec::with_capacity(dims.len());
        for &d in dims {
            views.push(u.row_block(start..start + d));
            start += d;
        }
        Self::new(views)
    }

    pub fn stacked(&self) -> Matrix {
        let refs: Vec<&Matrix> = self.views.iter().collect();
        Matrix::vstack(&refs)
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, i: usize) -> &Matrix {
        &self.views[i]
    }

    pub fn k(&self) -> usize {
        self.views[0].cols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::rows).collect()
    }

    pub(crate) fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::ShapeMismatch(format!(
                "weights have view heights {:?}, data has {:?}",
                self.dims(),
                dims
            )));
        }
        Ok(())
    }
}

/// Ridge parameters must lie in `[0, 1]`, one per view.
pub fn check_alpha(alpha: &[f64], n_views: usize) -> Result<()> {
    if alpha.len() != n_views {
        return Err(Error::ShapeMismatch(format!(
            "{} ridge parameters for {n_views} views",
            alpha.len()
        )));
    }
    if let Some(a) = alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::InvalidParameter(format!("ridge parameter {a} outside [0, 1]")));
    }
    Ok(())
}
