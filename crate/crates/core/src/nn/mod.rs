//! Small dense networks trained with mini-batch Adam.

pub mod adam;
pub mod head_net;
pub mod mlp;
pub mod objectives;
pub mod three_head;
pub mod train;

use serde::{Deserialize, Serialize};

pub use adam::{AdamConfig, OptimizerState};
pub use head_net::{fit_head_net, HeadNet, HeadNetGrads, Objective};
pub use mlp::{
    mlp_backward, mlp_forward, sigmoid, softplus, Activation, Dense, MlpGrads, MlpParams,
};
pub use objectives::{
    ald_scale, AldObjective, JointQuantileObjective, MseObjective, PinballObjective,
    ALD_SCALE_FLOOR,
};
pub use three_head::{
    finetune_main_head, train_quantile_joint, validate_delta, QuantileTriple, ThreeHeadQuantileNet,
};
pub use train::{head_net_to_mlp, train_regressor_mse};

/// Architecture and optimisation schedule shared by every trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Hidden layer widths of the ReLU backbone.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![256, 256],
            epochs: 100,
            batch_size: 256,
            adam: AdamConfig::default(),
        }
    }
}
