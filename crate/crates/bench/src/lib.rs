//! Benchmarks of the solver and the experiment harness.
