//! Sparse-regime pairing probe; run explicitly with --ignored.
use splab_core::metrics::*;
use splab_core::training::*;

#[test]
#[ignore]
fn probe_sparse_pairing() {
    for density in [0.12, 0.08] {
        let mut s = TrainConfig::standard_defaults();
        s.seed = 2;
        let (m_std, _) = train_standard(&s, 100, 20, density, None).unwrap();
        let mut a = TrainConfig::adversarial_defaults();
        a.steps = 30_000;
        a.seed = 2;
        let (m_adv, _) = train_adversarial(&a, 100, 20, density, None).unwrap();
        let g_std = interference_matrix(&m_std);
        let g_adv = interference_matrix(&m_adv);
        eprintln!(
            "density {:.2}: fpd {:.3} -> {:.3}; offdiag {:.4} -> {:.4} (ratio {:.2}); offdiag_sq ratio {:.2}",
            density,
            features_per_dimension(&m_std),
            features_per_dimension(&m_adv),
            mean_offdiag_interference(&g_std),
            mean_offdiag_interference(&g_adv),
            mean_offdiag_interference(&g_std) / mean_offdiag_interference(&g_adv),
            mean_offdiag_interference_squared(&g_std) / mean_offdiag_interference_squared(&g_adv),
        );
    }
}
