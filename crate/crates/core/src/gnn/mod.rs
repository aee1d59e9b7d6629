// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Reference message-passing classifiers (GCN and mean-aggregator SAGE)
//! with a sort-pooling readout, trained with binary cross-entropy.

mod model;
mod train;

pub use model::{
    adam_step, backward, backward_accumulate, forward, loss_bce, normalize_adjacency, sigmoid, ForwardCache,
    Gradients, GraphInput, ModelConfig, ModelKind, ModelState, OptimConfig, Propagation, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON,
};
pub use train::{
    derive_seed, train_and_evaluate, train_model, CvReport, FoldResult, TrainConfig,
    READOUT_DEVIATION,
};
