//! Control temperature of the flat schedule as a function of the mean energy,
//! against its small-energy expansion and the bisection reference.

use sabc::oracle::bisect_quartic;
use sabc::schedule::solve_quartic;

fn main() -> sabc::Result<()> {
    let c = 3.0;
    println!("      U         eps_e      bisection   eps_e / ((2c)^(-1/3) U^(4/3))");
    for k in 1..=6 {
        let u = 10f64.powi(-k);
        let e = solve_quartic(u, c)?;
        let lead = (2.0 * c).powf(-1.0 / 3.0) * u.powf(4.0 / 3.0);
        println!(
            "{u:9.1e} {e:12.5e} {:12.5e} {:10.4}",
            bisect_quartic(u, c),
            e / lead
        );
    }
    Ok(())
}
