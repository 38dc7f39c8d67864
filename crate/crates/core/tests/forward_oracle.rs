//! Compares the network against a direct transcription of its equations,
//! written with plain nested loops and no shared code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tweetsent_core::dataset::ImageTensor;
use tweetsent_core::model::{forward_rows, init_params, ModelConfig, ModelParams};
use tweetsent_core::subword::EncodedText;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn lstm(w_in: &[f64], w_h: &[f64], b: &[f64], xs: &[Vec<f64>], hidden: usize) -> Vec<f64> {
    let e = xs.first().map_or(0, Vec::len);
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    for x in xs {
        let z: Vec<f64> = (0..4 * hidden)
            .map(|r| {
                b[r] + (0..e).map(|k| w_in[r * e + k] * x[k]).sum::<f64>()
                    + (0..hidden).map(|k| w_h[r * hidden + k] * h[k]).sum::<f64>()
            })
            .collect();
        for j in 0..hidden {
            let (i, f, g, o) = (sig(z[j]), sig(z[hidden + j]), z[2 * hidden + j].tanh(), sig(z[3 * hidden + j]));
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
    }
    h
}

fn dense(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let out = b.len();
    (0..out).map(|o| b[o] + x.iter().enumerate().map(|(i, v)| v * w[i * out + o]).sum::<f64>()).collect()
}

fn oracle(p: &ModelParams<f64>, ids: &[u32], img: &ImageTensor) -> Vec<f64> {
    let cfg = &p.config;
    let emb: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| p.embedding.data()[id as usize * cfg.embed_dim..][..cfg.embed_dim].to_vec())
        .collect();
    let rev: Vec<Vec<f64>> = emb.iter().rev().cloned().collect();
    let f = &p.lstm_forward;
    let b = &p.lstm_backward;
    let mut text = lstm(f.w_input.data(), f.w_hidden.data(), f.bias.data(), &emb, cfg.recurrent_units);
    text.extend(lstm(b.w_input.data(), b.w_hidden.data(), b.bias.data(), &rev, cfg.recurrent_units));

    // act[y][x][c]
    let s0 = img.side();
    let mut act: Vec<Vec<Vec<f64>>> = (0..s0)
        .map(|y| (0..s0).map(|x| (0..3).map(|c| img.at(y, x, c) as f64).collect()).collect())
        .collect();
    for stage in &p.conv {
        let side = act.len();
        let (cin, cout) = (stage.kernel.shape()[2], stage.kernel.shape()[3]);
        let k = |ky: usize, kx: usize, ci: usize, co: usize| stage.kernel.data()[((ky * 3 + kx) * cin + ci) * cout + co];
        let mut conv = vec![vec![vec![0.0; cout]; side]; side];
        for y in 0..side as isize {
            for x in 0..side as isize {
                for co in 0..cout {
                    let mut s = stage.bias.data()[co];
                    for dy in -1..=1isize {
                        for dx in -1..=1isize {
                            let (iy, ix) = (y + dy, x + dx);
                            if iy < 0 || ix < 0 || iy >= side as isize || ix >= side as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                s += act[iy as usize][ix as usize][ci] * k((dy + 1) as usize, (dx + 1) as usize, ci, co);
                            }
                        }
                    }
                    conv[y as usize][x as usize][co] = s.max(0.0);
                }
            }
        }
        let half = side / 2;
        act = (0..half)
            .map(|y| {
                (0..half)
                    .map(|x| {
                        (0..cout)
                            .map(|c| {
                                conv[2 * y][2 * x][c]
                                    .max(conv[2 * y][2 * x + 1][c])
                                    .max(conv[2 * y + 1][2 * x][c])
                                    .max(conv[2 * y + 1][2 * x + 1][c])
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
    }
    let flat: Vec<f64> = act.into_iter().flatten().flatten().collect();
    let image: Vec<f64> = dense(p.image_proj.weight.data(), p.image_proj.bias.data(), &flat)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();

    let mut x: Vec<f64> = text.into_iter().chain(image).collect();
    for layer in &p.fusion {
        x = dense(layer.weight.data(), layer.bias.data(), &x).into_iter().map(|v| v.max(0.0)).collect();
    }
    dense(p.output.weight.data(), p.output.bias.data(), &x).into_iter().map(sig).collect()
}

fn config(seed: u64) -> ModelConfig {
    ModelConfig {
        vocab_size: 300,
        max_len: 7,
        embed_dim: 5,
        recurrent_units: 4,
        conv_channels: vec![3, 4],
        fusion_hidden: vec![9, 6],
        num_labels: 10,
        branch_dim: 8,
        image_side: 11,
        seed,
        reduced: true,
    }
}

#[test]
fn network_matches_oracle() {
    for seed in 0..4 {
        let cfg = config(seed);
        let mut p = init_params::<f64>(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        // Nonzero biases so every term of the equations is exercised.
        for (_, t) in p.tensors_mut() {
            for v in t.data_mut() {
                *v += rng.gen_range(-0.2..0.2);
            }
        }
        let mut texts = Vec::new();
        let mut images = Vec::new();
        for n in 0..5 {
            let len = (n + seed as usize) % (cfg.max_len + 1);
            let mut ids: Vec<u32> = (0..len).map(|_| rng.gen_range(1..300)).collect();
            ids.resize(cfg.max_len, 0);
            texts.push(EncodedText { ids, actual_len: len });
            let px = (0..cfg.image_side * cfg.image_side * 3).map(|_| rng.gen::<f32>()).collect();
            images.push(ImageTensor::new(cfg.image_side, px).unwrap());
        }
        let rows = forward_rows(&p, &texts, &images).unwrap();
        for ((row, t), img) in rows.iter().zip(&texts).zip(&images) {
            let expect = oracle(&p, t.active(), img);
            for (a, b) in row.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12, "seed {seed}: {a} vs {b}");
            }
        }
    }
}
