use proptest::prelude::*;

use asm2cpld_core::asm::{parse_program, Instruction, Opcode, Operand, Program, Register};
use asm2cpld_core::device::{fit, DeviceParams};
use asm2cpld_core::ir::{bypass_load_imm, build_dataflow, prepare_segment};
use asm2cpld_core::phdl::{parse_phdl, render_phdl, translate};
use asm2cpld_core::synth::{synthesize, ExprArena, OutputImpl, SynthOptions};
use asm2cpld_core::verify::{differential_check, interpret_segment, interpret_segment_at, RegisterFile};
use asm2cpld_core::word::WordWidth;

const MNEMONICS: [&str; 8] = ["addu", "subu", "and", "or", "sll", "srl", "sra", "li"];
const IMMEDIATES: [&str; 10] = ["0", "1", "-1", "255", "0xff00", "65535", "0x80000000", "-32768", "7", "0xffffffff"];

/// One supported instruction over a small register pool, so that
/// segments often stay within two inputs.
fn insn_text() -> impl Strategy<Value = String> {
    (0usize..8, 1u8..7, 0u8..7, any::<bool>(), 0u8..7, 0usize..10, 0u32..32).prop_map(
        |(op, d, s1, use_imm, s2, imm, sh)| {
            let m = MNEMONICS[op];
            match m {
                "li" => format!("{m} ${d}, {}", IMMEDIATES[imm]),
                "sll" | "srl" | "sra" => format!("{m} ${d}, ${s1}, {sh}"),
                _ if use_imm => format!("{m} ${d}, ${s1}, {}", IMMEDIATES[imm]),
                _ => format!("{m} ${d}, ${s1}, ${s2}"),
            }
        },
    )
}

fn segment(max: usize) -> impl Strategy<Value = Vec<Instruction>> {
    prop::collection::vec(insn_text(), 1..=max)
        .prop_map(|lines| parse_program(&lines.join("\n")).unwrap().remove(0).instructions)
}

fn random_file() -> impl Strategy<Value = [u32; 32]> {
    prop::array::uniform32(any::<u32>())
}

/// Host-arithmetic reference, written independently of the word helpers.
fn host(op: &str, a: u32, b: u32) -> u32 {
    match op {
        "addu" => a.wrapping_add(b),
        "subu" => a.wrapping_sub(b),
        "and" => a & b,
        "or" => a | b,
        "sll" => a << b,
        "srl" => a >> b,
        "sra" => ((a as i32) >> b) as u32,
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(text in insn_text()) {
        let insn = parse_program(&text).unwrap().remove(0).instructions.remove(0);
        let again = parse_program(&insn.to_string()).unwrap().remove(0).instructions.remove(0);
        prop_assert_eq!(&insn, &again);
        let slots = match insn.opcode {
            Opcode::Li | Opcode::Sll | Opcode::Srl | Opcode::Sra => (insn.opcode == Opcode::Li) as usize,
            _ => 0,
        };
        prop_assert!(insn.src1.is_some());
        prop_assert_eq!(insn.src2.is_none(), slots == 1);
    }

    #[test]
    fn blocks_partition_the_program(lines in prop::collection::vec(
        prop_oneof![insn_text(), Just("nop".to_string()), Just("loop:".to_string()), Just("bne $1, $2, loop".to_string()), Just("# note".to_string())],
        0..30,
    )) {
        let text = lines.join("\n");
        let p = Program::parse(&text).unwrap();
        let flat: Vec<String> = p.instructions().map(|i| i.to_string()).collect();
        let direct: Vec<String> = lines
            .iter()
            .filter(|l| !l.starts_with('#') && !l.ends_with(':'))
            .map(|l| parse_program(l).unwrap().remove(0).instructions.remove(0).to_string())
            .collect();
        prop_assert_eq!(flat, direct);
    }

    #[test]
    fn ir_preserves_semantics(seg in segment(12), regs in random_file()) {
        let Ok(g) = prepare_segment(&seg) else { return Ok(()) };
        let rf = RegisterFile::from_values(regs);
        let want = interpret_segment(&seg, &rf).unwrap().read(g.live_out);
        let inputs: Vec<u32> = g.live_in.iter().map(|&r| rf.read(r)).collect();
        prop_assert_eq!(g.evaluate(WordWidth::W32, &inputs), want);
        let lowered = g.lower_to_instructions().unwrap();
        prop_assert_eq!(interpret_segment(&lowered, &rf).unwrap().read(g.live_out), want);
        for n in &g.nodes {
            for o in &n.operands {
                if let asm2cpld_core::ir::OperandRef::Node(src) = o {
                    prop_assert!(g.nodes[*src].order < n.order);
                    prop_assert!(g.nodes[*src].users.contains(&n.id));
                }
            }
        }
    }

    #[test]
    fn bypass_is_idempotent(seg in segment(12)) {
        let Ok(g) = build_dataflow(&seg) else { return Ok(()) };
        let once = bypass_load_imm(&g);
        prop_assert_eq!(bypass_load_imm(&once), once);
    }

    #[test]
    fn phdl_round_trip(seg in segment(12)) {
        let Ok(g) = prepare_segment(&seg) else { return Ok(()) };
        let d = translate(&g, 3, WordWidth::W32).unwrap();
        prop_assert_eq!(parse_phdl(&render_phdl(&d)).unwrap(), d.clone());
        prop_assert_eq!(d.node_sets.len(), g.nodes.len() - 1);
    }

    #[test]
    fn collapsing_is_sound(seg in segment(8), vectors in prop::collection::vec((any::<u32>(), any::<u32>()), 64)) {
        let Ok(g) = prepare_segment(&seg) else { return Ok(()) };
        let d = translate(&g, 1, WordWidth::W32).unwrap();
        let on = synthesize(&d, &SynthOptions::default()).unwrap().mapped;
        let off = synthesize(&d, &SynthOptions { collapse_nodes: false, ..Default::default() }).unwrap().mapped;
        let k = on.input_sets.len();
        let batch: Vec<Vec<u32>> = vectors.iter().map(|&(a, b)| [a, b][..k].to_vec()).collect();
        prop_assert_eq!(on.eval_batch(&batch), off.eval_batch(&batch));
        let p = DeviceParams::default();
        prop_assert!(fit(&off, &p).macrocells_used >= fit(&on, &p).macrocells_used);
    }

    #[test]
    fn fit_ignores_output_order(seg in segment(8), rot in 0usize..32) {
        let Ok(g) = prepare_segment(&seg) else { return Ok(()) };
        let d = translate(&g, 1, WordWidth::W32).unwrap();
        let n = synthesize(&d, &SynthOptions::default()).unwrap().mapped;
        let mut permuted = n.clone();
        permuted.outputs.rotate_left(rot);
        permuted.outputs.reverse();
        let p = DeviceParams::default();
        let (a, b) = (fit(&n, &p), fit(&permuted, &p));
        prop_assert_eq!(a.macrocells_used, b.macrocells_used);
        prop_assert_eq!(a.latency_ns, b.latency_ns);
        prop_assert_eq!(fit(&n, &p), a);
    }

    #[test]
    fn pure_wires_are_detected_on_narrow_designs(seg in segment(8)) {
        let Ok(g) = prepare_segment(&seg) else { return Ok(()) };
        let w = WordWidth::new(4).unwrap();
        let d = translate(&g, 1, w).unwrap();
        let n = synthesize(&d, &SynthOptions::default()).unwrap().mapped;
        let k = n.input_sets.len();
        let pins = 4 * k as u32;
        let rows: Vec<Vec<u32>> = (0..1u32 << pins).map(|v| (0..k).map(|i| (v >> (4 * i)) & 0xF).collect()).collect();
        let outs: Vec<u32> = rows.chunks(64).flat_map(|c| n.eval_batch(c)).collect();
        for (bit, imp) in n.outputs.iter().enumerate() {
            let column: Vec<bool> = outs.iter().map(|o| o >> bit & 1 == 1).collect();
            for pin in 0..pins {
                let literal: Vec<bool> = (0..1u32 << pins).map(|v| v >> pin & 1 == 1).collect();
                if column == literal {
                    prop_assert_eq!(imp, &OutputImpl::Wire(pin));
                }
            }
        }
    }

    #[test]
    fn pipeline_matches_interpreter(seg in segment(12), seed in any::<u64>()) {
        let Ok(g) = prepare_segment(&seg) else { return Ok(()) };
        let d = translate(&g, 1, WordWidth::W32).unwrap();
        let n = synthesize(&d, &SynthOptions::default()).unwrap().mapped;
        let r = differential_check(&seg, &n, 512, seed);
        prop_assert!(r.is_ok(), "{:?}\n{}", r, seg.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("\n"));
    }

    #[test]
    fn constant_absorption(k in 0u32..8) {
        let mut a = ExprArena::new();
        let x = a.input(k);
        prop_assert_eq!(a.and(&[x, ExprArena::TRUE]), x);
        prop_assert_eq!(a.or(&[x, ExprArena::FALSE]), x);
        prop_assert_eq!(a.and(&[x, ExprArena::FALSE]), ExprArena::FALSE);
        prop_assert_eq!(a.or(&[x, ExprArena::TRUE]), ExprArena::TRUE);
    }
}

#[test]
fn interpreter_agrees_with_host_arithmetic() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100_000 {
        let op = MNEMONICS[rng.gen_range(0..7)];
        let (a, b): (u32, u32) = (rng.gen(), rng.gen());
        let shift = matches!(op, "sll" | "srl" | "sra");
        let b = if shift { b % 32 } else { b };
        let text = if shift { format!("{op} $3, $1, {b}") } else { format!("{op} $3, $1, $2") };
        let seg = parse_program(&text).unwrap().remove(0).instructions;
        let mut rf = RegisterFile::default();
        rf.write(Register::new(1).unwrap(), a);
        rf.write(Register::new(2).unwrap(), b);
        let got = interpret_segment_at(&seg, &rf, WordWidth::W32).unwrap().read(Register::new(3).unwrap());
        assert_eq!(got, host(op, a, b), "{text} with a={a:#x}");
    }
}

#[test]
fn immediates_parse_to_twos_complement() {
    let imm = |t: &str| match &parse_program(&format!("addu $1, $2, {t}")).unwrap()[0].instructions[0].src2 {
        Some(Operand::Imm(i)) => i.value,
        _ => unreachable!(),
    };
    assert_eq!(imm("-1"), u32::MAX);
    assert_eq!(imm("0xff00"), 65280);
    assert_eq!(imm("4294967295"), u32::MAX);
}
