//! Instance counts for every (W, H) in the grid, and one instance laid out by date.

use sleepcast::data::{generate_synthetic, preprocess, SyntheticConfig, DEFAULT_DROP_FEATURES};
use sleepcast::window::{instance_count, slide, WindowConfig, HORIZONS, WINDOWS};

fn main() -> sleepcast::Result<()> {
    let cfg = SyntheticConfig {
        n_subjects: 3,
        n_days: 40,
        ..Default::default()
    };
    let data = preprocess(&generate_synthetic(&cfg, 1)?, &DEFAULT_DROP_FEATURES)?.datasets;
    let ds = &data[0];
    println!("subject {}: {} days, {} gaps", ds.subject, ds.len(), ds.gaps().len());

    print!("{:>5}", "W\\H");
    for h in HORIZONS {
        print!("{h:>5}");
    }
    println!();
    for w in WINDOWS {
        print!("{w:>5}");
        for h in HORIZONS {
            let wc = WindowConfig::new(w, h)?;
            let n = slide(ds, &wc)?.len();
            // equals the closed form when the series has no gaps
            if ds.gaps().is_empty() {
                assert_eq!(n, instance_count(ds.len(), &wc));
            }
            print!("{n:>5}");
        }
        println!();
    }

    let inst = &slide(ds, &WindowConfig::new(7, 3)?)?[0];
    let inputs: Vec<String> = inst.input_days().map(|d| d.to_string()).collect();
    let targets: Vec<String> = inst.target_days().map(|d| d.to_string()).collect();
    println!(
        "\nfirst W=7 H=3 instance\n  inputs  {}\n  targets {}",
        inputs.join(" "),
        targets.join(" ")
    );
    println!("  x shape {:?}, y {:?}", inst.x.shape(), inst.y.data());
    Ok(())
}
