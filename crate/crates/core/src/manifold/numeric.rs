//! Numeric geometry built only on the chart metric.

use nalgebra::{DMatrix, DVector};

use super::{Christoffel, Manifold, MetricField, Point, Tangent, CHRISTOFFEL_FD_STEP, MAX_LOG_ITERATIONS, METRIC_FD_STEP};
use crate::error::{GeoError, Result};

const MAX_EXP_STEPS: usize = 1 << 16;
const MAX_LINE_SEARCH: usize = 30;

fn fd_step(rel: f64, q: &DVector<f64>) -> f64 {
    rel * q.amax().max(1.0)
}

fn metric_in_domain(metric: &dyn MetricField, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    if !metric.in_domain(q) || !q.iter().all(|c| c.is_finite()) {
        return Err(GeoError::OutsideDomain(q.as_slice().to_vec()));
    }
    Ok(metric.metric(q))
}

/// Christoffel symbols from central differences of `g`.
pub(crate) fn fd_christoffel(metric: &dyn MetricField, q: &DVector<f64>) -> Result<Christoffel> {
    let n = metric.coord_dim();
    let g = metric_in_domain(metric, q)?;
    let ginv = g
        .cholesky()
        .ok_or(GeoError::DegenerateMetric(f64::INFINITY))?
        .inverse();
    let h = fd_step(METRIC_FD_STEP, q);
    // dg[l] = ∂_l g
    let mut dg = Vec::with_capacity(n);
    let mut qp = q.clone();
    for l in 0..n {
        qp[l] = q[l] + h;
        let gp = metric_in_domain(metric, &qp)?;
        qp[l] = q[l] - h;
        let gm = metric_in_domain(metric, &qp)?;
        qp[l] = q[l];
        dg.push((gp - gm) / (2.0 * h));
    }
    let mut gamma = Christoffel::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let mut s = 0.0;
                for l in 0..n {
                    let gil = ginv[(i, l)];
                    if gil == 0.0 {
                        continue;
                    }
                    s += gil * (dg[j][(l, k)] + dg[k][(j, l)] - dg[l][(j, k)]);
                }
                gamma.set(i, j, k, 0.5 * s);
                gamma.set(i, k, j, 0.5 * s);
            }
        }
    }
    gamma.symmetrize();
    Ok(gamma)
}

impl Manifold {

    pub(crate) fn christoffel_raw(&self, q: &DVector<f64>) -> Result<Christoffel> {
        if !self.metric.in_domain(q) || !q.iter().all(|c| c.is_finite()) {
            return Err(GeoError::OutsideDomain(q.as_slice().to_vec()));
        }
        match self.metric.christoffel(q) {
            Some(gamma) => Ok(gamma),
            None => fd_christoffel(self.metric.as_ref(), q),
        }
    }

    fn geodesic_accel(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.metric.in_domain(q) || !q.iter().all(|c| c.is_finite()) {
            return Err(GeoError::OutsideDomain(q.as_slice().to_vec()));
        }
        match self.metric.christoffel_quadratic(q, v) {
            Some(a) => Ok(-a),
            None => Ok(-self.christoffel_raw(q)?.contract(v, v)),
        }
    }

    /// Raw RK4 step without canonicalisation. Any stage leaving the chart
    /// domain yields a chart-exit error carrying the input state.
    pub(crate) fn rk4_geodesic(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        dt: f64,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let exit = || GeoError::ChartExit {
            last_valid: Box::new(Tangent {
                base: Point::new(q.clone()),
                components: v.clone(),
            }),
        };
        let a1 = self.geodesic_accel(q, v).map_err(|_| exit())?;
        let q2 = q + v * (0.5 * dt);
        let v2 = v + &a1 * (0.5 * dt);
        let a2 = self.geodesic_accel(&q2, &v2).map_err(|_| exit())?;
        let q3 = q + &v2 * (0.5 * dt);
        let v3 = v + &a2 * (0.5 * dt);
        let a3 = self.geodesic_accel(&q3, &v3).map_err(|_| exit())?;
        let q4 = q + &v3 * dt;
        let v4 = v + &a3 * dt;
        let a4 = self.geodesic_accel(&q4, &v4).map_err(|_| exit())?;
        let q_new = q + (v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
        let v_new = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
        if !self.metric.in_domain(&q_new) {
            return Err(exit());
        }
        Ok((q_new, v_new))
    }

    /// Integrate the geodesic over unit parameter with `steps` RK4 steps.
    pub(crate) fn integrate_geodesic(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        steps: usize,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let dt = 1.0 / steps as f64;
        let (mut q, mut v) = (q.clone(), v.clone());
        for _ in 0..steps {
            let (qn, vn) = self.rk4_geodesic(&q, &v, dt)?;
            q = qn;
            v = vn;
        }
        Ok((q, v))
    }

    fn initial_steps(&self, q: &DVector<f64>, v: &DVector<f64>) -> usize {
        let g = self.metric.metric(q);
        let speed = v.dot(&(g * v)).max(0.0).sqrt();
        ((4.0 * speed).ceil() as usize).clamp(4, 1024)
    }

    /// Step-doubling exp: returns the endpoint and the step count at which
    /// halving the step moved the endpoint by less than `tol`.
    pub(crate) fn exp_raw(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        tol: f64,
    ) -> Result<(DVector<f64>, usize)> {
        if v.iter().all(|c| *c == 0.0) {
            return Ok((q.clone(), 1));
        }
        let mut steps = self.initial_steps(q, v);
        let mut coarse = self.integrate_geodesic(q, v, steps)?.0;
        loop {
            let fine = self.integrate_geodesic(q, v, 2 * steps)?.0;
            steps *= 2;
            // RK4: the fine error is about 1/15 of the change; removing
            // that estimate leaves a higher-order residual.
            let delta = self.metric.displacement(&coarse, &fine) / 15.0;
            if delta.amax() < tol {
                let q_end = self.metric.canonicalize(fine + delta);
                if self.metric.in_domain(&q_end) {
                    return Ok((q_end, steps));
                }
                return Ok((self.integrate_geodesic(q, v, steps)?.0, steps));
            }
            if steps >= MAX_EXP_STEPS {
                return Err(GeoError::ExpDivergence { steps, tol });
            }
            coarse = fine;
        }
    }

    /// The chord rescaled to its Riemannian length, so that the first
    /// shot travels about as far as the target.
    fn chord_guess(&self, from: &DVector<f64>, chord: DVector<f64>) -> DVector<f64> {
        const PANELS: usize = 16;
        let v = self.metric.project_tangent(from, chord.clone());
        let speed = |s: f64| -> Option<f64> {
            let q = from + &chord * s;
            if !self.metric.in_domain(&q) {
                return None;
            }
            let g = self.metric.metric(&q);
            Some(chord.dot(&(g * &chord)).max(0.0).sqrt())
        };
        let mut length = 0.0;
        for i in 0..=PANELS {
            let w = if i == 0 || i == PANELS {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            match speed(i as f64 / PANELS as f64) {
                Some(s) => length += w * s,
                None => return v,
            }
        }
        length /= 3.0 * PANELS as f64;
        let start = v.dot(&(self.metric.metric(from) * &v)).max(0.0).sqrt();
        if start > 0.0 && length.is_finite() && length > 0.0 {
            v * (length / start)
        } else {
            v
        }
    }

    /// Smallest doubling of the initial step count at which the endpoint
    /// of `exp_q(v)` is resolved to `tol`, judged against the next doubling,
    /// together with that endpoint. Coarse counts that leave the chart are
    /// skipped.
    fn resolve_steps(&self, q: &DVector<f64>, v: &DVector<f64>, tol: f64) -> Result<(usize, DVector<f64>)> {
        let mut steps = self.initial_steps(q, v);
        let mut coarse = loop {
            match self.integrate_geodesic(q, v, steps) {
                Ok((e, _)) => break e,
                Err(err) => {
                    steps *= 2;
                    if steps > MAX_EXP_STEPS {
                        return Err(err);
                    }
                }
            }
        };
        loop {
            let fine = self.integrate_geodesic(q, v, 2 * steps)?.0;
            // RK4: the coarse error is about 16/15 of the change.
            let change = self.metric.displacement(&coarse, &fine).amax() * (16.0 / 15.0);
            if change < tol {
                return Ok((steps, coarse));
            }
            steps *= 2;
            if steps >= MAX_EXP_STEPS {
                return Err(GeoError::ExpDivergence { steps, tol });
            }
            coarse = fine;
        }
    }

    /// Shooting logarithm: Newton on the endpoint residual with a
    /// forward-difference Jacobian and backtracking.
    ///
    /// The RK4 step count is fixed up front on the starting velocity and
    /// Newton runs at that count. If the converged velocity ends up far from
    /// the one the count was checked on, the count is checked again and
    /// iteration continues at a finer count when needed.
    pub(crate) fn log_numeric(
        &self,
        from: &DVector<f64>,
        to: &DVector<f64>,
        tol: f64,
        guess: Option<&DVector<f64>>,
    ) -> Result<DVector<f64>> {
        const RECHECK: f64 = 1e-2;
        let n = self.coord_dim();
        let chord = self.metric.displacement(from, to);
        if chord.iter().all(|c| *c == 0.0) {
            return Ok(DVector::zeros(n));
        }
        let exp_tol = 0.1 * tol;
        let mut v = match guess {
            Some(g) if g.len() == n && g.iter().all(|c| c.is_finite()) => {
                self.metric.project_tangent(from, g.clone())
            }
            _ => self.chord_guess(from, chord),
        };
        let (mut steps, mut end) = self.resolve_steps(from, &v, exp_tol)?;
        let mut anchor = v.clone();
        let mut r = self.metric.displacement(to, &end);
        let mut rn = r.amax();
        let mut iter = 0;
        loop {
            if rn < tol {
                if (&v - &anchor).amax() <= RECHECK * anchor.amax() {
                    return Ok(v);
                }
                let fine = self.integrate_geodesic(from, &v, 2 * steps)?.0;
                let change = self.metric.displacement(&end, &fine).amax() * (16.0 / 15.0);
                if change < exp_tol {
                    return Ok(v);
                }
                steps *= 2;
                if steps > MAX_EXP_STEPS {
                    return Err(GeoError::ExpDivergence {
                        steps,
                        tol: exp_tol,
                    });
                }
                anchor = v.clone();
                end = fine;
                r = self.metric.displacement(to, &end);
                rn = r.amax();
                if rn < tol {
                    continue;
                }
            }
            if iter >= MAX_LOG_ITERATIONS {
                return Err(GeoError::LogDivergence {
                    iterations: iter,
                    residual: rn,
                });
            }
            iter += 1;
            let eps = 1e-7 * v.amax().max(1.0);
            let mut jac = DMatrix::zeros(n, n);
            let mut vk = v.clone();
            for k in 0..n {
                vk[k] = v[k] + eps;
                let endk = self.integrate_geodesic(from, &vk, steps)?.0;
                vk[k] = v[k];
                let col = self.metric.displacement(&end, &endk) / eps;
                jac.set_column(k, &col);
            }
            let dv = match jac.clone().lu().solve(&(-&r)) {
                Some(dv) if dv.iter().all(|c| c.is_finite()) => dv,
                _ => jac
                    .svd(true, true)
                    .solve(&(-&r), 1e-14)
                    .map_err(|_| GeoError::LogDivergence {
                        iterations: iter,
                        residual: rn,
                    })?,
            };
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_LINE_SEARCH {
                let cand = &v + &dv * alpha;
                if let Ok((end_c, _)) = self.integrate_geodesic(from, &cand, steps) {
                    let r_c = self.metric.displacement(to, &end_c);
                    let rn_c = r_c.amax();
                    if rn_c < rn {
                        v = cand;
                        end = end_c;
                        r = r_c;
                        rn = rn_c;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // The coarse discretisation may have no better iterate;
                // refine before giving up.
                steps *= 2;
                if steps > MAX_EXP_STEPS {
                    return Err(GeoError::LogDivergence {
                        iterations: iter,
                        residual: rn,
                    });
                }
                anchor = v.clone();
                end = self.integrate_geodesic(from, &v, steps)?.0;
                r = self.metric.displacement(to, &end);
                rn = r.amax();
            }
        }
    }

    fn transport_rk4(
        &self,
        x: &DVector<f64>,
        xd: &DVector<f64>,
        w: &DVector<f64>,
        h: f64,
    ) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let f = |x: &DVector<f64>, xd: &DVector<f64>, w: &DVector<f64>| -> Result<_> {
            let gamma = self.christoffel_raw(x)?;
            Ok((xd.clone(), -gamma.contract(xd, xd), -gamma.contract(xd, w)))
        };
        let (k1x, k1v, k1w) = f(x, xd, w)?;
        let (k2x, k2v, k2w) = f(
            &(x + &k1x * (0.5 * h)),
            &(xd + &k1v * (0.5 * h)),
            &(w + &k1w * (0.5 * h)),
        )?;
        let (k3x, k3v, k3w) = f(
            &(x + &k2x * (0.5 * h)),
            &(xd + &k2v * (0.5 * h)),
            &(w + &k2w * (0.5 * h)),
        )?;
        let (k4x, k4v, k4w) = f(&(x + &k3x * h), &(xd + &k3v * h), &(w + &k3w * h))?;
        let c = h / 6.0;
        Ok((
            x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * c,
            xd + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * c,
            w + (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * c,
        ))
    }

    fn transport_fixed(
        &self,
        from: &DVector<f64>,
        path: &DVector<f64>,
        v: &DVector<f64>,
        steps: usize,
    ) -> Result<DVector<f64>> {
        let h = 1.0 / steps as f64;
        let (mut x, mut xd, mut w) = (from.clone(), path.clone(), v.clone());
        for _ in 0..steps {
            let (xn, xdn, wn) = self.transport_rk4(&x, &xd, &w, h)?;
            x = xn;
            xd = xdn;
            w = wn;
        }
        Ok(w)
    }

    /// Integrate `V' + Γ(γ)(γ', V) = 0` along `s -> exp_from(s * path)`.
    pub(crate) fn transport_numeric(
        &self,
        from: &DVector<f64>,
        path: &DVector<f64>,
        v: &DVector<f64>,
        tol: f64,
    ) -> Result<DVector<f64>> {
        if path.iter().all(|c| *c == 0.0) {
            return Ok(v.clone());
        }
        let mut steps = self.initial_steps(from, path);
        let mut coarse = self.transport_fixed(from, path, v, steps)?;
        loop {
            let fine = self.transport_fixed(from, path, v, 2 * steps)?;
            steps *= 2;
            if (&fine - &coarse).amax() < tol {
                return Ok(fine);
            }
            if steps >= MAX_EXP_STEPS {
                return Err(GeoError::ExpDivergence { steps, tol });
            }
            coarse = fine;
        }
    }

    /// `R(u, w) z` with `R^i_{jkl} = ∂_k Γ^i_{lj} - ∂_l Γ^i_{kj}
    /// + Γ^i_{km} Γ^m_{lj} - Γ^i_{lm} Γ^m_{kj}` and
    /// `(R(u, w) z)^i = R^i_{jkl} z^j u^k w^l`.
    pub(crate) fn riemann_apply(
        &self,
        q: &DVector<f64>,
        u: &DVector<f64>,
        w: &DVector<f64>,
        z: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let n = self.coord_dim();
        let gamma = self.christoffel_raw(q)?;
        let h = fd_step(CHRISTOFFEL_FD_STEP, q);
        let mut dgamma = Vec::with_capacity(n);
        let mut qp = q.clone();
        for k in 0..n {
            qp[k] = q[k] + h;
            let mut d = self.christoffel_raw(&qp)?;
            qp[k] = q[k] - h;
            let gm = self.christoffel_raw(&qp)?;
            qp[k] = q[k];
            d.axpy(-1.0, &gm);
            let mut scaled = Christoffel::zeros(n);
            scaled.axpy(1.0 / (2.0 * h), &d);
            dgamma.push(scaled);
        }
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if z[j] == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        let coef = z[j] * u[k] * w[l];
                        if coef == 0.0 {
                            continue;
                        }
                        let mut r = dgamma[k].get(i, l, j) - dgamma[l].get(i, k, j);
                        for m in 0..n {
                            r += gamma.get(i, k, m) * gamma.get(m, l, j)
                                - gamma.get(i, l, m) * gamma.get(m, k, j);
                        }
                        s += r * coef;
                    }
                }
            }
            out[i] = s;
        }
        Ok(out)
    }
}
