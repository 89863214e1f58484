use criterion::{black_box, criterion_group, criterion_main, Criterion};

use asm2cpld_bench::{design_of, synthetic_program, EX1, EX2, EX3, BYTESWAP};
use asm2cpld_core::driver::{compile, CompileOptions};
use asm2cpld_core::{fit, parse_phdl, synthesize, DeviceParams, Program, SynthOptions};

fn frontend(c: &mut Criterion) {
    let big = synthetic_program(200);
    c.bench_function("parse/1000 lines", |b| b.iter(|| Program::parse(black_box(&big)).unwrap()));
    c.bench_function("parse_phdl/byteswap", |b| b.iter(|| parse_phdl(black_box(BYTESWAP)).unwrap()));
}

fn synthesis(c: &mut Criterion) {
    let opts = SynthOptions::default();
    for (name, listing) in [("ex1", EX1), ("ex2", EX2), ("ex3", EX3)] {
        let d = design_of(listing);
        c.bench_function(&format!("synthesize/{name}"), |b| b.iter(|| synthesize(black_box(&d), &opts).unwrap()));
    }
    let n = synthesize(&design_of(EX3), &opts).unwrap().mapped;
    let p = DeviceParams::default();
    c.bench_function("fit/ex3", |b| b.iter(|| fit(black_box(&n), &p)));
}

fn end_to_end(c: &mut Criterion) {
    let opts = CompileOptions::default();
    c.bench_function("compile/ex1", |b| b.iter(|| compile("ex1.s", black_box(EX1), "ex1", &opts).unwrap()));
    let big = synthetic_program(20);
    let mut g = c.benchmark_group("compile");
    g.sample_size(10);
    g.bench_function("20 blocks", |b| b.iter(|| compile("big.s", black_box(&big), "big", &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, frontend, synthesis, end_to_end);
criterion_main!(benches);
