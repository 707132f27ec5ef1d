// Every example runs to completion.

mod branching_extinction {
    include!("../examples/branching_extinction.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod convergence_thresholds {
    include!("../examples/convergence_thresholds.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod correlations {
    include!("../examples/correlations.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod cumulants_poisson {
    include!("../examples/cumulants_poisson.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod graph_counts {
    include!("../examples/graph_counts.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod janossy_densities {
    include!("../examples/janossy_densities.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod kirkwood_salsburg {
    include!("../examples/kirkwood_salsburg.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod random_connection_model {
    include!("../examples/random_connection_model.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod tonks_partition {
    include!("../examples/tonks_partition.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod tree_generating_functions {
    include!("../examples/tree_generating_functions.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod ursell_functions {
    include!("../examples/ursell_functions.rs");

    #[test]
    fn runs() {
        main().unwrap();
    }
}

mod run_config {
    include!("../examples/run_config.rs");

    #[test]
    fn runs() {
        main();
    }
}
