//! Low-level numeric kernels shared by the autodiff tape and the metrics.

/// Geometry of a 2-D convolution over one `channels x height x width` plane stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    /// Rows of the unfolded matrix.
    pub fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn col_cols(&self) -> usize {
        self.out_height() * self.out_width()
    }
}

/// Unfolds `x` (`channels x height x width`) into a `col_rows x col_cols` matrix.
pub(crate) fn im2col(x: &[f64], g: ConvGeom, cols: &mut [f64]) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let k = g.kernel;
    debug_assert_eq!(cols.len(), g.col_rows() * oh * ow);
    for c in 0..g.channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let out = &mut cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let dst = &mut out[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= g.height as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.width as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters (accumulates) columns back onto `x`.
pub(crate) fn col2im(cols: &[f64], g: ConvGeom, x: &mut [f64]) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let k = g.kernel;
    for c in 0..g.channels {
        let plane = &mut x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.width as isize {
                            dst[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Row-major matrix view: `rows x cols` with optional transposition.
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub transposed: bool,
}

impl<'a> Mat<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Mat {
            data,
            rows,
            cols,
            transposed: false,
        }
    }

    /// Logical transpose of a stored `rows x cols` matrix.
    pub fn t(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Mat {
            data,
            rows,
            cols,
            transposed: true,
        }
    }

    fn logical(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `out = a * b + beta * out`, with `out` row-major.
pub(crate) fn gemm(a: Mat<'_>, b: Mat<'_>, beta: f64, out: &mut [f64]) {
    let (m, k) = a.logical();
    let (k2, n) = b.logical();
    assert_eq!(k, k2, "gemm inner dimensions");
    assert!(a.data.len() >= a.rows * a.cols && b.data.len() >= b.rows * b.cols);
    assert_eq!(out.len(), m * n, "gemm output size");
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: bounds of all three operands are checked above against the
    // logical dimensions and strides handed to the kernel.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Normalized 1-D Gaussian taps of odd length `len`.
pub fn gaussian_taps(len: usize, sigma: f64) -> Vec<f64> {
    let center = (len / 2) as f64;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| {
            let d = i as f64 - center;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable "valid" filtering of one `height x width` plane.
pub(crate) fn blur_plane_valid(
    x: &[f64],
    height: usize,
    width: usize,
    taps: &[f64],
    out: &mut [f64],
) {
    let l = taps.len();
    let (oh, ow) = (height + 1 - l, width + 1 - l);
    let mut tmp = vec![0.0; height * ow];
    for y in 0..height {
        let row = &x[y * width..(y + 1) * width];
        for ox in 0..ow {
            tmp[y * ow + ox] = taps.iter().zip(&row[ox..ox + l]).map(|(t, v)| t * v).sum();
        }
    }
    for oy in 0..oh {
        for ox in 0..ow {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * tmp[(oy + i) * ow + ox];
            }
            out[oy * ow + ox] = acc;
        }
    }
}

/// Adjoint of [`blur_plane_valid`], accumulating into `dx`.
pub(crate) fn blur_plane_valid_adjoint(
    dy: &[f64],
    height: usize,
    width: usize,
    taps: &[f64],
    dx: &mut [f64],
) {
    let l = taps.len();
    let (oh, ow) = (height + 1 - l, width + 1 - l);
    let mut dtmp = vec![0.0; height * ow];
    for oy in 0..oh {
        for ox in 0..ow {
            let g = dy[oy * ow + ox];
            for (i, t) in taps.iter().enumerate() {
                dtmp[(oy + i) * ow + ox] += t * g;
            }
        }
    }
    for y in 0..height {
        for ox in 0..ow {
            let g = dtmp[y * ow + ox];
            for (i, t) in taps.iter().enumerate() {
                dx[y * width + ox + i] += t * g;
            }
        }
    }
}
