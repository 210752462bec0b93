//! One-axis twisting of `|CSS_x>` in the Dicke manifold: squeezing, the
//! inversion and the cat states formed at `t_q = 2πI/q`.

use xxcascade::analysis::cat_peak_census;
use xxcascade::dicke::{css_x_dicke, dicke_observables, ghz_dicke, oat_evolve, p_jx_dicke, rotor_frequencies, OatSpec};
use xxcascade::run::oat_squeezing_point;

fn main() -> xxcascade::Result<()> {
    let n = 40;
    let oat = OatSpec::bare(n, 1.0);
    let css = css_x_dicke(n);

    println!("{:>8} {:>9} {:>9} {:>9} {:>8}", "t", "<Jx>", "Var(Jx)", "xi2", "F_GHZ");
    let times = (0..8).map(|k| k as f64 * 2.0).chain((1..=8).map(|k| k as f64 * oat.t_q(2) / 8.0));
    for t in times {
        let o = dicke_observables(&oat_evolve(&css, &oat, t));
        let xi2 = if o.moments.mean[0].abs() > 1.0 { format!("{:.4}", o.xi2()) } else { "-".into() };
        println!("{t:>8.3} {:>9.4} {:>9.3} {xi2:>9} {:>8.4}", o.moments.mean[0], o.var_jx(), o.f_ghz);
    }

    let (_, xi2, t_opt) = oat_squeezing_point(&oat)?;
    println!("\nbest squeezing xi2 = {xi2:.5} ({:.2} dB) at t = {t_opt:.4}", -10.0 * xi2.log10());

    let ghz = oat_evolve(&css, &oat, oat.t_ghz());
    println!("fidelity with the GHZ state at t = pi I: {:.12}", ghz.fidelity(&ghz_dicke(n)));

    for q in [2, 4, 6, 8] {
        let p = p_jx_dicke(&oat_evolve(&css, &oat, oat.t_q(q)));
        let census = cat_peak_census(&p, q)?;
        let at: Vec<f64> = census.peaks.iter().map(|p| p.0).collect();
        println!("t_{q} = {:.4}: {} peaks of P(Jx) at {at:?}", oat.t_q(q), census.count());
    }

    let lines = rotor_frequencies(oat.inertia, 3)?;
    println!("\n<Jx> lines: {:?}", lines.jx);
    Ok(())
}
