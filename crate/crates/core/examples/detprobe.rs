use cramp_core::*;

fn main() {
    let cfg = CrampConfig::new(4, 8, 100, 0.05, 99, BaseTest::Lw, Hypothesis::OneSampleIdentity);
    let (_, s1) = empirical_critical_value(20, None, 50, &cfg, None).unwrap();
    let (_, s2) = empirical_critical_value(20, None, 50, &cfg, None).unwrap();
    let diffs: Vec<usize> = (0..s1.len()).filter(|&i| s1[i] != s2[i]).collect();
    println!("fresh-vs-fresh diffs: {}", diffs.len());

    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let s3 = pool.install(|| empirical_critical_value(20, None, 50, &cfg, None).unwrap().1);
    let s4 = pool.install(|| empirical_critical_value(20, None, 50, &cfg, None).unwrap().1);
    let d34: Vec<usize> = (0..s3.len()).filter(|&i| s3[i] != s4[i]).collect();
    println!("seq-vs-seq diffs: {}", d34.len());
    let d13: Vec<usize> = (0..s1.len()).filter(|&i| s1[i] != s3[i]).collect();
    println!("par-vs-seq diffs: {}", d13.len());

    let x = sample_gaussian(
        &nalgebra::DVector::zeros(50),
        &CovMatrix::identity(50),
        20,
        RngStream::new(1, 0),
    )
    .unwrap();
    let mut c2 = cfg.clone();
    c2.projections = 64;
    let a = projected_pvalues(&x, None, &c2).unwrap();
    let b = projected_pvalues(&x, None, &c2).unwrap();
    let dab: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
    println!("projected_pvalues repeat diffs: {}", dab.len());
}
