//! Generate a seeded cohort, show each subject's drawn parameters, and write the CSV.
//!
//! cargo run --example synthetic_data -- [out.csv]

use sleepcast::data::{generate_synthetic, preprocess, subject_params, write_csv, SyntheticConfig, DEFAULT_DROP_FEATURES};

fn main() -> sleepcast::Result<()> {
    let cfg = SyntheticConfig {
        n_subjects: 6,
        n_days: 60,
        ..Default::default()
    };
    let seed = 7;
    let raw = generate_synthetic(&cfg, seed)?;
    println!("subject  level  weekly  beta_steps  beta_stress  missing");
    for ds in &raw {
        let p = subject_params(&cfg, seed, ds.subject);
        println!(
            "{:>7}  {:>5.1}  {:>6.1}  {:>10.2}  {:>11.2}  {:>7}",
            ds.subject.to_string(),
            p.level,
            p.weekly_amp,
            p.beta_steps,
            p.beta_stress,
            ds.missing_count()
        );
    }

    let pre = preprocess(&raw, &DEFAULT_DROP_FEATURES)?;
    let first = &pre.datasets[0];
    println!(
        "\nafter cleaning: {} features, {} days for subject {}",
        first.num_features(),
        first.len(),
        first.subject
    );
    println!("imputation warnings: {}", pre.warnings.len());

    if let Some(path) = std::env::args().nth(1) {
        write_csv(&path, &raw)?;
        println!("wrote {path}");
    }
    Ok(())
}
