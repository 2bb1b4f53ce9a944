use std::time::Instant;

use cppgen_core::detect::{localize_icons_report, train_knn, KnnModel, LocalizerParams, Rejection};
use cppgen_core::iou;
use cppgen_core::synth::{icon_set, synthetic_screen, write_icon_dirs, Shape};
use image::DynamicImage;

#[test]
fn synthetic_screens_recover_glyphs_and_filter_distractors() {
    let params = LocalizerParams::default();
    let start = Instant::now();
    for seed in 0..10 {
        let s = synthetic_screen(seed);
        let rep = localize_icons_report(&s.image, &[], &params);
        for (g, shape) in &s.glyphs {
            let best = rep.icons.iter().map(|b| iou(b, g)).fold(0.0, f64::max);
            assert!(best >= 0.9, "seed {seed}: {shape:?} at {g:?} best IoU {best}");
        }
        assert_eq!(rep.icons.len(), s.glyphs.len(), "seed {seed}: {:?}", rep.icons);
        assert!(rep.rejected.contains(&(s.banner, Rejection::TooLarge)), "seed {seed}");
        assert!(rep.rejected.contains(&(s.bar, Rejection::Elongated)), "seed {seed}: bar {:?} rejected {:?}", s.bar, rep.rejected);
    }
    eprintln!("10 screens in {:?}", start.elapsed());
}

#[test]
fn knn_separates_circles_from_crosses() {
    let classes = [("Circle", Shape::FilledCircle), ("Cross", Shape::Cross)];
    let train = icon_set(&classes, 20, 1);
    let test = icon_set(&classes, 10, 2);
    let dir = tempfile::tempdir().unwrap();
    write_icon_dirs(dir.path(), &train).unwrap();
    let model = train_knn(dir.path(), 5, 32).unwrap();
    assert_eq!(model.len(), 40);
    assert_eq!(model.classes(), ["Circle", "Cross"]);
    let correct = test
        .iter()
        .filter(|(img, c)| &model.predict(&DynamicImage::ImageLuma8(img.clone())).unwrap().class == c)
        .count();
    assert!(correct >= 18, "{correct}/20");
}

#[test]
fn train_knn_rejects_bad_layouts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("A")).unwrap();
    assert!(train_knn(dir.path(), 5, 32).is_err());
    std::fs::create_dir(dir.path().join("B")).unwrap();
    std::fs::write(dir.path().join("A/x.png"), b"not an image").unwrap();
    let err = train_knn(dir.path(), 5, 32).unwrap_err().to_string();
    assert!(err.contains("no usable images"), "{err}");
    assert!(KnnModel::new(0, 32).is_err());
}
