//! The homotopy operator inverts d on a closed (1,1) current.
use std::sync::Arc;
use zerosets::domain::Domain;
use zerosets::forms::{DivisorModel, FormField, LocalizedLelong};
use zerosets::homotopy::{self, Homotopy, RetractParams};
use zerosets::metric::MetricModel;
use zerosets::num::c;

fn main() -> zerosets::Result<()> {
    let dom = Domain::unit_ball(2);
    let theta: Arc<dyn FormField> = Arc::new(LocalizedLelong::new(&DivisorModel::parse("z1*z2", 2, 1.0, 0.1)?, &dom, 0.2));
    let z = [c(0.3, 0.1), c(0.85, -0.2)];
    for level in 0..3 {
        let h = Homotopy::new(RetractParams::at_level(level)?, MetricModel::exact_ball(2), theta.clone())?;
        let chk = homotopy::d_omega_check(|w| h.omega_real(w), &theta.coefficients(&z)?, &z, 1e-3)?;
        println!("level {level}: |d omega - theta| / |theta| = {:.2e}", chk.error / chk.scale);
    }
    Ok(())
}
