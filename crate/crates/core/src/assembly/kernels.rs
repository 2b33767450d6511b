//! Matrix-free element stiffness kernels, monomorphized on the number of
//! GLL points per axis. Local index i + NP(j + NP k); elastic fields are
//! interleaved by component.

#[inline(always)]
fn idx<const NP: usize>(i: usize, j: usize, k: usize) -> usize {
    i + NP * (j + NP * k)
}

/// Reference-space acoustic metric G = (w det J / ρ) J⁻¹J⁻ᵀ at a point,
/// packed as [G00, G11, G22, G01, G02, G12].
pub(crate) trait AcousticMetric {
    fn at(&self, p: usize) -> [f64; 6];
}

/// Inverse Jacobian J⁻¹[r][a] and quadrature weight w·det J at a point.
pub(crate) trait ElasticMetric {
    fn at(&self, p: usize) -> ([[f64; 3]; 3], f64);
}

/// Affine element: constant metric scaled by the tensor GLL weight.
pub(crate) struct AffineAcoustic<'a> {
    pub c: [f64; 6],
    pub w3: &'a [f64],
}

impl AcousticMetric for AffineAcoustic<'_> {
    #[inline(always)]
    fn at(&self, p: usize) -> [f64; 6] {
        let w = self.w3[p];
        self.c.map(|v| v * w)
    }
}

pub(crate) struct GeneralAcoustic<'a> {
    pub g: &'a [f64],
}

impl AcousticMetric for GeneralAcoustic<'_> {
    #[inline(always)]
    fn at(&self, p: usize) -> [f64; 6] {
        let s = &self.g[6 * p..6 * p + 6];
        [s[0], s[1], s[2], s[3], s[4], s[5]]
    }
}

pub(crate) struct AffineElastic<'a> {
    pub jinv: [[f64; 3]; 3],
    pub det: f64,
    pub w3: &'a [f64],
}

impl ElasticMetric for AffineElastic<'_> {
    #[inline(always)]
    fn at(&self, p: usize) -> ([[f64; 3]; 3], f64) {
        (self.jinv, self.w3[p] * self.det)
    }
}

/// Per point: J⁻¹ row-major (9 values) then w·det J.
pub(crate) struct GeneralElastic<'a> {
    pub g: &'a [f64],
}

impl ElasticMetric for GeneralElastic<'_> {
    #[inline(always)]
    fn at(&self, p: usize) -> ([[f64; 3]; 3], f64) {
        let s = &self.g[10 * p..10 * p + 10];
        ([[s[0], s[1], s[2]], [s[3], s[4], s[5]], [s[6], s[7], s[8]]], s[9])
    }
}

/// out = K_e φ for one element; `f` is scratch of length 3·NP³.
pub(crate) fn acoustic_kernel<const NP: usize, M: AcousticMetric>(
    d: &[[f64; NP]; NP],
    m: &M,
    phi: &[f64],
    out: &mut [f64],
    f: &mut [f64],
) {
    let n3 = NP * NP * NP;
    assert!(phi.len() >= n3 && out.len() >= n3 && f.len() >= 3 * n3);
    let (f0, rest) = f.split_at_mut(n3);
    let (f1, f2) = rest.split_at_mut(n3);
    for k in 0..NP {
        for j in 0..NP {
            for i in 0..NP {
                let mut g0 = 0.0;
                let mut g1 = 0.0;
                let mut g2 = 0.0;
                for q in 0..NP {
                    g0 += d[i][q] * phi[idx::<NP>(q, j, k)];
                    g1 += d[j][q] * phi[idx::<NP>(i, q, k)];
                    g2 += d[k][q] * phi[idx::<NP>(i, j, q)];
                }
                let p = idx::<NP>(i, j, k);
                let g = m.at(p);
                f0[p] = g[0] * g0 + g[3] * g1 + g[4] * g2;
                f1[p] = g[3] * g0 + g[1] * g1 + g[5] * g2;
                f2[p] = g[4] * g0 + g[5] * g1 + g[2] * g2;
            }
        }
    }
    for k in 0..NP {
        for j in 0..NP {
            for i in 0..NP {
                let mut s = 0.0;
                for q in 0..NP {
                    s += d[q][i] * f0[idx::<NP>(q, j, k)]
                        + d[q][j] * f1[idx::<NP>(i, q, k)]
                        + d[q][k] * f2[idx::<NP>(i, j, q)];
                }
                out[idx::<NP>(i, j, k)] = s;
            }
        }
    }
}

/// out = K_e u for one element with Lamé parameters (λ, μ); `f` is scratch
/// of length 9·NP³ holding w det J σ J⁻ᵀ per point.
#[allow(clippy::too_many_arguments)]
pub(crate) fn elastic_kernel<const NP: usize, M: ElasticMetric>(
    d: &[[f64; NP]; NP],
    m: &M,
    lambda: f64,
    mu: f64,
    u: &[f64],
    out: &mut [f64],
    f: &mut [f64],
) {
    let n3 = NP * NP * NP;
    assert!(u.len() >= 3 * n3 && out.len() >= 3 * n3 && f.len() >= 9 * n3);
    for k in 0..NP {
        for j in 0..NP {
            for i in 0..NP {
                let mut du = [[0.0; 3]; 3];
                for q in 0..NP {
                    let (dx, dy, dz) = (d[i][q], d[j][q], d[k][q]);
                    let px = 3 * idx::<NP>(q, j, k);
                    let py = 3 * idx::<NP>(i, q, k);
                    let pz = 3 * idx::<NP>(i, j, q);
                    for a in 0..3 {
                        du[a][0] += dx * u[px + a];
                        du[a][1] += dy * u[py + a];
                        du[a][2] += dz * u[pz + a];
                    }
                }
                let p = idx::<NP>(i, j, k);
                let (ji, jw) = m.at(p);
                let mut grad = [[0.0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        grad[a][b] = du[a][0] * ji[0][b] + du[a][1] * ji[1][b] + du[a][2] * ji[2][b];
                    }
                }
                let lt = lambda * (grad[0][0] + grad[1][1] + grad[2][2]);
                let mut sig = [[0.0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        sig[a][b] = jw * (mu * (grad[a][b] + grad[b][a]) + if a == b { lt } else { 0.0 });
                    }
                }
                let fp = &mut f[9 * p..9 * p + 9];
                for a in 0..3 {
                    for r in 0..3 {
                        fp[3 * a + r] = sig[a][0] * ji[r][0] + sig[a][1] * ji[r][1] + sig[a][2] * ji[r][2];
                    }
                }
            }
        }
    }
    for k in 0..NP {
        for j in 0..NP {
            for i in 0..NP {
                let mut s = [0.0; 3];
                for q in 0..NP {
                    let fx = 9 * idx::<NP>(q, j, k);
                    let fy = 9 * idx::<NP>(i, q, k);
                    let fz = 9 * idx::<NP>(i, j, q);
                    let (dx, dy, dz) = (d[q][i], d[q][j], d[q][k]);
                    for a in 0..3 {
                        s[a] += dx * f[fx + 3 * a] + dy * f[fy + 3 * a + 1] + dz * f[fz + 3 * a + 2];
                    }
                }
                let p = 3 * idx::<NP>(i, j, k);
                out[p..p + 3].copy_from_slice(&s);
            }
        }
    }
}

/// Calls `$body` with `const $np` bound to the runtime points-per-axis.
macro_rules! with_np {
    ($n:expr, $np:ident => $body:expr) => {
        match $n {
            2 => {
                const $np: usize = 2;
                $body
            }
            3 => {
                const $np: usize = 3;
                $body
            }
            4 => {
                const $np: usize = 4;
                $body
            }
            5 => {
                const $np: usize = 5;
                $body
            }
            6 => {
                const $np: usize = 6;
                $body
            }
            7 => {
                const $np: usize = 7;
                $body
            }
            8 => {
                const $np: usize = 8;
                $body
            }
            9 => {
                const $np: usize = 9;
                $body
            }
            10 => {
                const $np: usize = 10;
                $body
            }
            11 => {
                const $np: usize = 11;
                $body
            }
            other => unreachable!("unsupported points per axis {other}"),
        }
    };
}
pub(crate) use with_np;
