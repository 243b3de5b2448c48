use proptest::prelude::*;
use riesz_dre::models::{Link, ModelSpec};
use riesz_dre::riesz::RieszObjective;

#[test]
fn link_tokens_round_trip() {
    for link in [
        Link::Identity,
        Link::Exp,
        Link::Sigmoid,
        Link::ScaledSigmoid { upper: 2.5 },
        Link::ShiftedSoftplus,
        Link::ShiftedExp,
    ] {
        assert_eq!(link.to_string().parse::<Link>().unwrap(), link);
    }
    for bad in ["scaled-sigmoid:0", "scaled-sigmoid:-1", "scaled-sigmoid:inf", "log"] {
        assert!(bad.parse::<Link>().is_err(), "{bad}");
    }
}

#[test]
fn objective_tokens_round_trip() {
    for o in [RieszObjective::RieszLsq, RieszObjective::PairedLsif, RieszObjective::RieszUkl] {
        assert_eq!(o.to_string().parse::<RieszObjective>().unwrap(), o);
    }
}

proptest! {
    #[test]
    fn scaled_sigmoid_upper_survives_printing(upper in 1e-6f64..1e6) {
        let link = Link::ScaledSigmoid { upper };
        prop_assert_eq!(link.to_string().parse::<Link>().unwrap(), link);
    }

    #[test]
    fn model_tokens_round_trip(degree in 0usize..6, centers in 1usize..500, sigma in 0.01f64..10.0) {
        for tok in [format!("linear:poly:{degree}"), format!("linear:rbf:{centers}:{sigma}"), format!("kulsif:median:{sigma}")] {
            let spec: ModelSpec = tok.parse().unwrap();
            prop_assert_eq!(spec.to_string().parse::<ModelSpec>().unwrap(), spec);
        }
    }
}
