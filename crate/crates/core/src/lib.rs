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

//! Network-control-theory node features for graph classification: average
//! controllability and centrality encoders, small reference GNNs, and
//! cross-validated ROC AUC evaluation.

pub mod centrality;
pub mod encode;
pub mod error;
pub mod eval;
pub mod features;
pub mod gnn;
pub mod graph;
pub mod json;
pub mod nct;
pub mod oracle;
pub mod par;
pub mod spectra;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
