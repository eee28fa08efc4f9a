//! Carleson norms of a point measure and of a smoothed Lelong current.
use zerosets::domain::Domain;
use zerosets::forms::{self, CarlesonBudget, CellBudget, DiscreteMeasure, DivisorModel, LocalizedLelong};
use zerosets::metric::MetricModel;
use zerosets::num::c;

fn main() -> zerosets::Result<()> {
    let dom = Domain::unit_ball(2);
    let budget = CarlesonBudget::default();
    for d in [1e-1, 1e-2, 1e-3] {
        let mu = DiscreteMeasure::atom(vec![c(1.0 - d, 0.0), c(0.0, 0.0)], d * d);
        println!("atom at depth {d:.0e}: {:.4}", forms::carleson_norm_measure(&mu, &dom, &budget)?.norm);
    }
    let theta = LocalizedLelong::new(&DivisorModel::parse("z1 - 0.5*z2", 2, 1.0, 0.1)?, &dom, 0.6);
    let r = forms::carleson_norm_current(&theta, &dom, &MetricModel::exact_ball(2), true, &budget, &CellBudget::default())?;
    println!("smoothed current: {:.4} at eps {:.2e}", r.norm, r.argsup_epsilon);
    Ok(())
}
