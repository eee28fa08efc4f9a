//! Bergman norm against 1/tau near the boundary of the ball.
use zerosets::domain::DefiningForm;
use zerosets::geometry;
use zerosets::metric::MetricModel;
use zerosets::num::{self, c};

fn main() -> zerosets::Result<()> {
    let metric = MetricModel::exact_ball(2);
    let dom = metric.domain().clone();
    for d in [1e-1, 1e-2, 1e-3] {
        let zeta = [c(1.0 - d, 0.0), c(0.0, 0.0)];
        let dz = dom.d(DefiningForm::Analytic, &zeta)?;
        for (name, v) in [("normal", num::unit(2, 0)), ("tangent", num::unit(2, 1))] {
            let x = metric.norm(&zeta, &v)? * geometry::tau(&dom, &zeta, &v, dz)?;
            println!("d {d:.0e} {name:7}: |v|_B * tau = {x:.4}");
        }
        let u = num::unit(2, 1);
        let err = num::frobenius(&(metric.da(&zeta, &u)? - metric.da_fd(&zeta, &u)?));
        println!("          dA along e2 vs differences: {err:.2e}");
    }
    Ok(())
}
