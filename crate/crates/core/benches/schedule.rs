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

//! Sequential versus parallel schedules for featurization and fold training.
//! Build with `--no-default-features` to measure the sequential-only library.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use nct_efa::encode::{EncodingMode, EncodingSpec};
use nct_efa::features::featurize;
use nct_efa::gnn::{train_and_evaluate, TrainConfig};
use nct_efa::par::Schedule;
use nct_efa::synth::{regular_pair_dataset, RegularPairConfig};

fn schedules() -> Vec<(&'static str, Schedule)> {
    vec![("sequential", Schedule::Sequential), ("parallel", Schedule::Parallel)]
}

fn bench_featurize(c: &mut Criterion) {
    let ds = regular_pair_dataset(&RegularPairConfig::default()).unwrap().unlabeled();
    let spec = EncodingSpec::new(EncodingMode::NctEfaRaw);
    let mut group = c.benchmark_group("featurize_200");
    group.sample_size(10);
    for (name, schedule) in schedules() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &schedule, |b, &s| {
            b.iter(|| featurize(&ds, &spec, s).unwrap())
        });
    }
    group.finish();
}

fn bench_train(c: &mut Criterion) {
    let ds = regular_pair_dataset(&RegularPairConfig { count: 60, ..Default::default() }).unwrap();
    let features = featurize(&ds.unlabeled(), &EncodingSpec::new(EncodingMode::NctEfaRaw), Schedule::Sequential)
        .unwrap()
        .matrices()
        .unwrap();
    let cfg = TrainConfig { epochs: 2, folds: 5, ..TrainConfig::default() };
    let mut group = c.benchmark_group("train_5fold_2epochs");
    group.sample_size(10);
    for (name, schedule) in schedules() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &schedule, |b, &s| {
            b.iter(|| train_and_evaluate(&ds, &features, &cfg, s).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_featurize, bench_train);
criterion_main!(benches);
