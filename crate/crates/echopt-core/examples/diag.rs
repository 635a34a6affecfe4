use echopt_core::dataset::{read_dataset, FrameStack};
use echopt_core::metrics::cross_corr_coeff;
use echopt_core::net::{predict_next, ModelParams};
use echopt_core::flow::flow_warp;
use std::path::Path;

fn main() {
    let params = ModelParams::load(Path::new("/tmp/echopt_run/toy5/checkpoint")).unwrap();
    let ds = read_dataset(Path::new("/tmp/echopt_run/test.esd")).unwrap();
    let n = 3;
    // Bin one-shot CC by |omega| and |v| of the prediction command.
    let mut bins: Vec<(String, Vec<f64>, Vec<f64>)> = vec![
        ("slow  |w|<0.2".into(), vec![], vec![]),
        ("mid   |w|<0.6".into(), vec![], vec![]),
        ("fast  |w|>=0.6".into(), vec![], vec![]),
    ];
    for i in (1..ds.records.len() - n - 1).step_by(5) {
        let stack = FrameStack {
            frames: (i..i + n).map(|j| ds.records[j].scape.clone()).collect(),
            commands: (i - 1..i + n).map(|j| ds.records[j].commanded).collect(),
            target: None,
        };
        let cmd = *stack.commands.last().unwrap();
        let target = &ds.records[i + n].scape;
        let e = predict_next(&params, &stack).unwrap();
        let f = flow_warp(stack.frames.last().unwrap(), cmd, 0.2).unwrap();
        let cc_e = cross_corr_coeff(&e, target).unwrap();
        let cc_f = cross_corr_coeff(&f, target).unwrap();
        let b = if cmd.omega_r.abs() < 0.2 { 0 } else if cmd.omega_r.abs() < 0.6 { 1 } else { 2 };
        bins[b].1.push(cc_e);
        bins[b].2.push(cc_f);
    }
    for (name, e, f) in &bins {
        let me = e.iter().sum::<f64>() / e.len().max(1) as f64;
        let mf = f.iter().sum::<f64>() / f.len().max(1) as f64;
        println!("{name}: n {:4}  echopt {me:.3}  flow {mf:.3}", e.len());
    }
}
