//! Benchmarks for the gml-core solvers live in `benches/`.
