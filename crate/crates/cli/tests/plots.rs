use shoal_cli::svg::{heatmap_svg, probability_svg, trajectory_svg, CellGrid, Heatmap, Scene};
use shoal_cli::commands::HEATMAP_PIXELS;
use shoal_core::{builtin_config, Builtin};

#[test]
fn config1_heatmap_peaks_at_the_food() {
    let cfg = builtin_config(Builtin::Config1Left);
    let field = cfg.solve_field().unwrap();
    let map = Heatmap::from_grid(&CellGrid::from_field(&field), HEATMAP_PIXELS);
    assert!(map.nx <= HEATMAP_PIXELS && map.ny <= HEATMAP_PIXELS);
    let (pi, pj) = map.argmax().unwrap();
    let peak = map.pixel_center(pi, pj);
    assert!((peak - cfg.food.center).norm() < 0.1, "peak pixel at {peak}");

    // Cross-check: the field's own argmax cell falls inside the brightest pixel.
    let (ci, cj) = field.argmax();
    let cell = field.cell_center(ci, cj);
    assert!((cell.x - peak.x).abs() <= map.pixel / 2.0 && (cell.y - peak.y).abs() <= map.pixel / 2.0);

    let scene = Scene::from_arena(&cfg.arena, Some((cfg.food.center, cfg.food.radius)));
    let a = heatmap_svg(&map, &scene);
    assert_eq!(a, heatmap_svg(&map, &scene));
    assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
    assert!(a.contains("fill=\"#fde725\""));
}

#[test]
fn obstacles_are_outlined() {
    let cfg = builtin_config(Builtin::Config3);
    let field = cfg.solve_field().unwrap();
    let map = Heatmap::from_grid(&CellGrid::from_field(&field), 80);
    let svg = heatmap_svg(&map, &Scene::from_arena(&cfg.arena, None));
    assert_eq!(svg.matches("class=\"obstacle\"").count(), 2);
    assert_eq!(svg.matches("class=\"food\"").count(), 0);
}

#[test]
fn empty_result_draws_nothing() {
    assert!(probability_svg(&[]).is_none());
}

#[test]
fn probability_chart_is_deterministic() {
    let points = [(2, 0.98), (3, 1.0), (5, 0.96), (20, 0.32)];
    let a = probability_svg(&points).unwrap();
    assert_eq!(a, probability_svg(&points).unwrap());
    assert_eq!(a.matches("class=\"point\"").count(), 4);
}

#[test]
fn four_instants_of_ten_fish() {
    let mut cfg = builtin_config(Builtin::Config1Left);
    cfg.seed = 3;
    let field = cfg.solve_field().unwrap();
    let instants = [0.0, 30.0, 44.0, 120.0];
    let steps: Vec<usize> = instants.iter().map(|t| (t / cfg.params.dt).round() as usize).collect();
    let mut panels: Vec<(f64, Vec<shoal_core::Vec2>)> = Vec::new();
    shoal_core::experiment::run_trial_observed(&cfg, &field, |k, s| {
        if let Some(i) = steps.iter().position(|&x| x == k) {
            panels.push((instants[i], s.positions.clone()));
        }
    })
    .unwrap();
    let svg = trajectory_svg(&panels, &Scene::from_arena(&cfg.arena, Some((cfg.food.center, cfg.food.radius))));
    let groups: Vec<&str> = svg.split("<g class=\"panel\"").skip(1).collect();
    assert_eq!(groups.len(), 4);
    for g in groups {
        assert_eq!(g.matches("class=\"fish\"").count(), 10);
    }
}
