use serde::{Deserialize, Serialize};
use sleepcast_kernel::Rng;

use crate::error::{Error, Result};

/// One point of the hyperparameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperParams {
    pub num_conv_layers: usize,
    pub num_lstm_layers: usize,
    pub cnn_hidden_size: usize,
    pub lstm_hidden_size: usize,
    pub dropout_cnn: f64,
    pub dropout_lstm: f64,
    pub batch_size: usize,
    pub alpha: f64,
    pub use_batchnorm: bool,
    /// Negate domain-loss gradients flowing into the shared layers (adversarial variant, off by default).
    pub gradient_reversal: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            num_conv_layers: 1,
            num_lstm_layers: 1,
            cnn_hidden_size: 16,
            lstm_hidden_size: 64,
            dropout_cnn: 0.1,
            dropout_lstm: 0.1,
            batch_size: 32,
            alpha: 0.1,
            use_batchnorm: false,
            gradient_reversal: false,
        }
    }
}

impl HyperParams {
    /// Channel width leaving the conv stack.
    pub fn final_channels(&self) -> usize {
        if self.num_conv_layers >= 2 {
            2 * self.cnn_hidden_size
        } else {
            self.cnn_hidden_size
        }
    }

    /// Grid membership.
    pub fn validate(&self) -> Result<()> {
        SearchSpace::default().check(self)
    }

    /// Structural sanity only; permits sizes outside the search grid.
    pub fn validate_structure(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(1..=2).contains(&self.num_conv_layers) {
            return bad(format!("num_conv_layers = {} must be 1 or 2", self.num_conv_layers));
        }
        if self.num_lstm_layers == 0 || self.cnn_hidden_size == 0 || self.lstm_hidden_size == 0 || self.batch_size == 0 {
            return bad("layer counts, widths and batch size must be at least 1".into());
        }
        for (name, p) in [("dropout_cnn", self.dropout_cnn), ("dropout_lstm", self.dropout_lstm)] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} = {p} must lie in [0, 1)"));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha = {} must lie in [0, 1]", self.alpha));
        }
        Ok(())
    }
}

fn tenths(range: std::ops::RangeInclusive<u32>) -> Vec<f64> {
    range.map(|k| f64::from(k) / 10.0).collect()
}

/// Discrete search grid. Each field lists the admissible values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub num_conv_layers: Vec<usize>,
    pub num_lstm_layers: Vec<usize>,
    pub cnn_hidden_size: Vec<usize>,
    pub lstm_hidden_size: Vec<usize>,
    pub dropout_cnn: Vec<f64>,
    pub dropout_lstm: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub alpha: Vec<f64>,
    pub use_batchnorm: Vec<bool>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            num_conv_layers: vec![1, 2],
            num_lstm_layers: vec![1, 2, 3],
            cnn_hidden_size: vec![16, 32, 64],
            lstm_hidden_size: vec![64, 128, 256],
            dropout_cnn: tenths(1..=5),
            dropout_lstm: tenths(1..=5),
            batch_size: vec![8, 16, 32],
            alpha: tenths(0..=10),
            use_batchnorm: vec![false, true],
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

impl SearchSpace {
    pub fn cardinality(&self) -> usize {
        [
            self.num_conv_layers.len(),
            self.num_lstm_layers.len(),
            self.cnn_hidden_size.len(),
            self.lstm_hidden_size.len(),
            self.dropout_cnn.len(),
            self.dropout_lstm.len(),
            self.batch_size.len(),
            self.alpha.len(),
            self.use_batchnorm.len(),
        ]
        .iter()
        .product()
    }

    pub fn contains(&self, hp: &HyperParams) -> bool {
        self.check(hp).is_ok()
    }

    fn check(&self, hp: &HyperParams) -> Result<()> {
        hp.validate_structure()?;
        let miss = |field: &str, v: String| Err(Error::InvalidParameter(format!("{field} = {v} is not in the search grid")));
        macro_rules! exact {
            ($($f:ident),*) => {$(
                if !self.$f.contains(&hp.$f) {
                    return miss(stringify!($f), format!("{:?}", hp.$f));
                }
            )*};
        }
        macro_rules! approx {
            ($($f:ident),*) => {$(
                if !self.$f.iter().any(|&v| close(v, hp.$f)) {
                    return miss(stringify!($f), hp.$f.to_string());
                }
            )*};
        }
        exact!(
            num_conv_layers,
            num_lstm_layers,
            cnn_hidden_size,
            lstm_hidden_size,
            batch_size,
            use_batchnorm
        );
        approx!(dropout_cnn, dropout_lstm, alpha);
        Ok(())
    }

    /// Uniform draw: one independent index per field, in declaration order.
    pub fn sample(&self, rng: &mut Rng) -> Result<HyperParams> {
        if self.cardinality() == 0 {
            return Err(Error::InvalidParameter("search space has an empty field".into()));
        }
        fn pick<T: Copy>(v: &[T], rng: &mut Rng) -> T {
            v[rng.below(v.len())]
        }
        Ok(HyperParams {
            num_conv_layers: pick(&self.num_conv_layers, rng),
            num_lstm_layers: pick(&self.num_lstm_layers, rng),
            cnn_hidden_size: pick(&self.cnn_hidden_size, rng),
            lstm_hidden_size: pick(&self.lstm_hidden_size, rng),
            dropout_cnn: pick(&self.dropout_cnn, rng),
            dropout_lstm: pick(&self.dropout_lstm, rng),
            batch_size: pick(&self.batch_size, rng),
            alpha: pick(&self.alpha, rng),
            use_batchnorm: pick(&self.use_batchnorm, rng),
            gradient_reversal: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_size() {
        assert_eq!(SearchSpace::default().cardinality(), 2 * 3 * 3 * 3 * 5 * 5 * 3 * 11 * 2);
        assert_eq!(SearchSpace::default().cardinality(), 89_100);
    }

    #[test]
    fn draws_lie_in_grid() {
        let space = SearchSpace::default();
        let mut rng = Rng::new(4);
        for _ in 0..30 {
            let hp = space.sample(&mut rng).unwrap();
            assert!(space.contains(&hp), "{hp:?}");
            hp.validate().unwrap();
        }
        assert!(space.contains(&HyperParams::default()));
    }

    #[test]
    fn off_grid_values_rejected() {
        for hp in [
            HyperParams {
                cnn_hidden_size: 8,
                ..Default::default()
            },
            HyperParams {
                alpha: 0.15,
                ..Default::default()
            },
            HyperParams {
                dropout_cnn: 0.0,
                ..Default::default()
            },
            HyperParams {
                num_conv_layers: 3,
                ..Default::default()
            },
        ] {
            assert!(matches!(hp.validate(), Err(Error::InvalidParameter(_))), "{hp:?}");
        }
        // accumulated float error still matches the grid
        let hp = HyperParams {
            alpha: 0.1 * 3.0,
            ..Default::default()
        };
        hp.validate().unwrap();
    }

    #[test]
    fn final_channels_follow_depth() {
        assert_eq!(
            HyperParams {
                num_conv_layers: 1,
                cnn_hidden_size: 16,
                ..Default::default()
            }
            .final_channels(),
            16
        );
        assert_eq!(
            HyperParams {
                num_conv_layers: 2,
                cnn_hidden_size: 32,
                ..Default::default()
            }
            .final_channels(),
            64
        );
    }
}
