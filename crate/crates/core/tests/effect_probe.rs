//! Scale probe for the headline effects; run explicitly with --ignored.
use splab_core::metrics::*;
use splab_core::training::*;
use splab_core::attacks::AttackConfig;

#[test]
#[ignore]
fn probe_phase_diagram_and_pairing() {
    // Phase diagram: fpd across densities with default standard recipe.
    for density in [1.0, 0.7, 0.5, 0.4, 0.3, 0.2, 0.15, 0.1] {
        let mut cfg = TrainConfig::standard_defaults();
        cfg.seed = 1;
        let (model, report) = train_standard(&cfg, 100, 20, density, None).unwrap();
        eprintln!(
            "STD density {:.3}: fpd {:.3}, offdiag {:.4}, loss {:.5}",
            density,
            features_per_dimension(&model),
            mean_offdiag_interference(&interference_matrix(&model)),
            report.final_clean_loss,
        );
    }
    // Pairing effect at density 0.2: full 150k adversarial vs standard,
    // plus a cheap 30k variant to see how fast the effect appears.
    for (steps, label) in [(30_000usize, "adv30k"), (150_000, "adv150k")] {
        let mut cfg = TrainConfig::adversarial_defaults();
        cfg.steps = steps;
        cfg.seed = 1;
        let (model, report) = train_adversarial(&cfg, 100, 20, 0.2, None).unwrap();
        eprintln!(
            "{label} density 0.200: fpd {:.3}, offdiag {:.4}, clean {:.5}, adv {:.5}",
            features_per_dimension(&model),
            mean_offdiag_interference(&interference_matrix(&model)),
            report.final_clean_loss,
            report.final_adv_loss.unwrap(),
        );
    }
    let _ = AttackConfig::default();
}
