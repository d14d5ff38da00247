use cramp_core::{chi2_sf, normal_sf};

fn main() {
    let v = chi2_sf(7.81, 3).unwrap();
    println!("chi2_sf(7.81, 3) = {v:.17} (exact 0.05010605635000594)");
    println!("err = {:.3e}", (v - 0.050106056350005941f64).abs());
    for (x, df, exact) in [
        (1e-8f64, 2u64, 0.999999995f64),
        (55.76, 40, 0.050201698), // spot values
        (3.84, 1, 0.050043521),
    ] {
        let v = chi2_sf(x, df).unwrap();
        println!("chi2_sf({x}, {df}) = {v:.12} vs {exact}");
    }
    println!("normal_sf(1.96) = {:.15}", normal_sf(1.96));
}
