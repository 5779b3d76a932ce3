//! Dense numeric kernels shared by the tape ops and by no-grad forward paths.

use ndarray::{Array1, Array2, Array3, ArrayD, ArrayView2, Ix4, IxDyn};

/// Output spatial size of a convolution along one axis.
pub(crate) fn conv_out(size: usize, k: usize, stride: usize, pad: usize) -> usize {
    (size + 2 * pad).saturating_sub(k) / stride + 1
}

/// Unfold (N, C, H, W) into (N, C*k*k, Ho*Wo) patch columns.
pub(crate) fn im2col(x: &ArrayD<f64>, k: usize, stride: usize, pad: usize) -> Array3<f64> {
    let (n, c, h, w) = dims4(x);
    let ho = conv_out(h, k, stride, pad);
    let wo = conv_out(w, k, stride, pad);
    let mut col = Array3::<f64>::zeros((n, c * k * k, ho * wo));
    let xs = x.as_slice().expect("im2col: non-contiguous input");
    let cs = col.as_slice_mut().unwrap();
    for ni in 0..n {
        let xoff = ni * c * h * w;
        let coff = ni * c * k * k * ho * wo;
        for ci in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (ci * k + ky) * k + kx;
                    let roff = coff + row * ho * wo;
                    for oy in 0..ho {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let xrow = xoff + ci * h * w + iy as usize * w;
                        let crow = roff + oy * wo;
                        for ox in 0..wo {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            cs[crow + ox] = xs[xrow + ix as usize];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Fold (C*k*k, Ho*Wo) patch columns back onto an (C, H, W) grid, accumulating
/// overlaps. Inverse scatter of [`im2col`] for one batch element.
fn col2im_into(
    col: &ArrayView2<f64>,
    out: &mut [f64],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
) {
    let ho = conv_out(h, k, stride, pad);
    let wo = conv_out(w, k, stride, pad);
    let cs = col.as_slice().expect("col2im: non-contiguous columns");
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let roff = row * ho * wo;
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let orow = ci * h * w + iy as usize * w;
                    let crow = roff + oy * wo;
                    for ox in 0..wo {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        out[orow + ix as usize] += cs[crow + ox];
                    }
                }
            }
        }
    }
}

pub(crate) fn dims4(x: &ArrayD<f64>) -> (usize, usize, usize, usize) {
    let s = x.shape();
    assert_eq!(s.len(), 4, "expected NCHW tensor, got shape {s:?}");
    (s[0], s[1], s[2], s[3])
}

/// Plain convolution forward: x (N,Cin,H,W) * w (Cout,Cin,k,k) + b (Cout).
///
/// Shared by the autodiff op and by fixed-weight networks that never need
/// gradients, so both paths compute identical values.
pub fn conv2d_forward(
    x: &ArrayD<f64>,
    w: &ArrayD<f64>,
    b: &ArrayD<f64>,
    stride: usize,
    pad: usize,
) -> ArrayD<f64> {
    let (n, cin, h, wd) = dims4(x);
    let ws = w.shape();
    assert_eq!(ws.len(), 4);
    assert_eq!(ws[1], cin, "conv2d: channel mismatch {:?} vs {:?}", ws, x.shape());
    assert_eq!(ws[2], ws[3], "conv2d: square kernels only");
    let (cout, k) = (ws[0], ws[2]);
    let ho = conv_out(h, k, stride, pad);
    let wo = conv_out(wd, k, stride, pad);
    assert!(ho > 0 && wo > 0, "conv2d: output collapsed to zero");
    let col = im2col(x, k, stride, pad);
    let w2 = w.view().into_shape_with_order((cout, cin * k * k)).unwrap();
    let mut y = ArrayD::<f64>::zeros(IxDyn(&[n, cout, ho, wo]));
    for ni in 0..n {
        let yn = w2.dot(&col.index_axis(ndarray::Axis(0), ni));
        let mut dst = y.index_axis_mut(ndarray::Axis(0), ni);
        let dst_flat = dst.as_slice_mut().unwrap();
        dst_flat.copy_from_slice(yn.as_slice().unwrap());
    }
    let bs = b.as_slice().unwrap();
    for ni in 0..n {
        for co in 0..cout {
            let mut plane = y.slice_mut(ndarray::s![ni, co, .., ..].as_ref());
            plane += bs[co];
        }
    }
    y
}

/// Gradients of [`conv2d_forward`] w.r.t. input, weight and bias.
pub(crate) fn conv2d_backward(
    x: &ArrayD<f64>,
    w: &ArrayD<f64>,
    g: &ArrayD<f64>,
    stride: usize,
    pad: usize,
    need_dx: bool,
    need_dw: bool,
) -> (Option<ArrayD<f64>>, Option<ArrayD<f64>>, Option<ArrayD<f64>>) {
    let (n, cin, h, wd) = dims4(x);
    let ws = w.shape();
    let (cout, k) = (ws[0], ws[2]);
    let ho = conv_out(h, k, stride, pad);
    let wo = conv_out(wd, k, stride, pad);
    let ckk = cin * k * k;
    let w2 = w.view().into_shape_with_order((cout, ckk)).unwrap();
    let col = im2col(x, k, stride, pad);

    let mut dw = need_dw.then(|| Array2::<f64>::zeros((cout, ckk)));
    let mut db = need_dw.then(|| Array1::<f64>::zeros(cout));
    let mut dx = need_dx.then(|| ArrayD::<f64>::zeros(x.raw_dim()));

    for ni in 0..n {
        let gn = g
            .index_axis(ndarray::Axis(0), ni)
            .into_shape_with_order((cout, ho * wo))
            .unwrap();
        if let Some(dw) = dw.as_mut() {
            let coln = col.index_axis(ndarray::Axis(0), ni);
            *dw += &gn.dot(&coln.t());
        }
        if let Some(db) = db.as_mut() {
            *db += &gn.sum_axis(ndarray::Axis(1));
        }
        if let Some(dx) = dx.as_mut() {
            let dcol = w2.t().dot(&gn);
            let base = ni * cin * h * wd;
            let flat = dx.as_slice_mut().unwrap();
            col2im_into(
                &dcol.view(),
                &mut flat[base..base + cin * h * wd],
                cin,
                h,
                wd,
                k,
                stride,
                pad,
            );
        }
    }
    (
        dx,
        dw.map(|d| d.into_shape_with_order(IxDyn(ws)).unwrap()),
        db.map(|d| d.into_dyn()),
    )
}

/// x (N,F) * wT (F,O) + b (O).
pub(crate) fn linear_forward(x: &ArrayD<f64>, w: &ArrayD<f64>, b: &ArrayD<f64>) -> ArrayD<f64> {
    let x2 = as2(x);
    let w2 = as2(w);
    assert_eq!(x2.ncols(), w2.ncols(), "linear: feature dim mismatch");
    let mut y = x2.dot(&w2.t());
    let b1 = b.view().into_dimensionality::<ndarray::Ix1>().unwrap();
    y += &b1;
    y.into_dyn()
}

pub(crate) fn as2(x: &ArrayD<f64>) -> ArrayView2<'_, f64> {
    x.view()
        .into_dimensionality::<ndarray::Ix2>()
        .expect("expected rank-2 tensor")
}

pub(crate) fn upsample2_forward(x: &ArrayD<f64>) -> ArrayD<f64> {
    let (n, c, h, w) = dims4(x);
    let mut y = ArrayD::<f64>::zeros(IxDyn(&[n, c, 2 * h, 2 * w]));
    let xv = x.view().into_dimensionality::<Ix4>().unwrap();
    let mut yv = y.view_mut().into_dimensionality::<Ix4>().unwrap();
    for ni in 0..n {
        for ci in 0..c {
            for yy in 0..h {
                for xx in 0..w {
                    let v = xv[(ni, ci, yy, xx)];
                    yv[(ni, ci, 2 * yy, 2 * xx)] = v;
                    yv[(ni, ci, 2 * yy, 2 * xx + 1)] = v;
                    yv[(ni, ci, 2 * yy + 1, 2 * xx)] = v;
                    yv[(ni, ci, 2 * yy + 1, 2 * xx + 1)] = v;
                }
            }
        }
    }
    y
}

pub(crate) fn upsample2_backward(g: &ArrayD<f64>) -> ArrayD<f64> {
    let (n, c, h2, w2) = dims4(g);
    let (h, w) = (h2 / 2, w2 / 2);
    let mut d = ArrayD::<f64>::zeros(IxDyn(&[n, c, h, w]));
    let gv = g.view().into_dimensionality::<Ix4>().unwrap();
    let mut dv = d.view_mut().into_dimensionality::<Ix4>().unwrap();
    for ni in 0..n {
        for ci in 0..c {
            for yy in 0..h {
                for xx in 0..w {
                    dv[(ni, ci, yy, xx)] = gv[(ni, ci, 2 * yy, 2 * xx)]
                        + gv[(ni, ci, 2 * yy, 2 * xx + 1)]
                        + gv[(ni, ci, 2 * yy + 1, 2 * xx)]
                        + gv[(ni, ci, 2 * yy + 1, 2 * xx + 1)];
                }
            }
        }
    }
    d
}

/// 2x2 average pooling; requires even spatial dims.
pub(crate) fn avgpool2_forward(x: &ArrayD<f64>) -> ArrayD<f64> {
    let (n, c, h, w) = dims4(x);
    assert!(h % 2 == 0 && w % 2 == 0, "avgpool2: odd spatial dims");
    let mut y = ArrayD::<f64>::zeros(IxDyn(&[n, c, h / 2, w / 2]));
    let xv = x.view().into_dimensionality::<Ix4>().unwrap();
    let mut yv = y.view_mut().into_dimensionality::<Ix4>().unwrap();
    for ni in 0..n {
        for ci in 0..c {
            for yy in 0..h / 2 {
                for xx in 0..w / 2 {
                    yv[(ni, ci, yy, xx)] = 0.25
                        * (xv[(ni, ci, 2 * yy, 2 * xx)]
                            + xv[(ni, ci, 2 * yy, 2 * xx + 1)]
                            + xv[(ni, ci, 2 * yy + 1, 2 * xx)]
                            + xv[(ni, ci, 2 * yy + 1, 2 * xx + 1)]);
                }
            }
        }
    }
    y
}

pub(crate) fn avgpool2_backward(g: &ArrayD<f64>) -> ArrayD<f64> {
    let (n, c, ho, wo) = dims4(g);
    let mut d = ArrayD::<f64>::zeros(IxDyn(&[n, c, ho * 2, wo * 2]));
    let gv = g.view().into_dimensionality::<Ix4>().unwrap();
    let mut dv = d.view_mut().into_dimensionality::<Ix4>().unwrap();
    for ni in 0..n {
        for ci in 0..c {
            for yy in 0..ho {
                for xx in 0..wo {
                    let v = 0.25 * gv[(ni, ci, yy, xx)];
                    dv[(ni, ci, 2 * yy, 2 * xx)] = v;
                    dv[(ni, ci, 2 * yy, 2 * xx + 1)] = v;
                    dv[(ni, ci, 2 * yy + 1, 2 * xx)] = v;
                    dv[(ni, ci, 2 * yy + 1, 2 * xx + 1)] = v;
                }
            }
        }
    }
    d
}
