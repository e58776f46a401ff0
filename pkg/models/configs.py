import ml_collections

# per-detector confidence thresholds; rcnn fires many confident false positives
DETECTOR_THRESHOLDS = {
    'ssd': 0.5,
    'rcnn': 0.98,
    'rrc': 0.5,
}


def get_tracker_config():
    config = ml_collections.ConfigDict()
    config.iou_gate = 0.3
    config.max_coast = 5
    config.coast_decay = 0.9
    return config


def get_stereo_config():
    config = ml_collections.ConfigDict()
    config.min_valid_fraction = 0.25
    return config


def get_forest_config():
    config = ml_collections.ConfigDict()
    config.n_trees = 30
    config.criterion = 'gini'
    config.max_features = 'sqrt'
    config.min_samples_split = 2
    return config


def get_eval_config():
    config = ml_collections.ConfigDict()
    config.match_overlap = 0.5
    config.fusion_overlap = 0.7
    config.operating_threshold = 0.5
    config.min_height = 25
    config.bin_size_m = 10.0
    return config


def get_synth_config():
    config = ml_collections.ConfigDict()
    config.seed = 0
    config.n_sequences = 20
    config.frames_per_sequence = 100
    config.image_width = 480
    config.image_height = 144

    # ground-plane camera
    config.focal_px = 240.0
    config.baseline_m = 0.54
    config.camera_height_m = 1.65
    config.object_height_m = 1.5
    config.object_width_range_m = (1.6, 2.2)
    config.depth_range_m = (6.0, 18.0)

    config.object_count_range = (3, 7)
    config.spawn_rate = 0.02
    config.velocity_range = (-2.0, 2.0)
    config.velocity_jitter = 0.5
    # narrower right-camera boxes and duplicates are not detected
    config.min_visible_width = 4.0

    # detector model
    config.miss_probability = 0.2
    # chance per visible object and frame of a loose duplicate detection beside it
    config.fp_rate = 0.05
    config.confidence_noise = 0.3
    config.box_jitter = 0.02
    config.stereo_independent = True

    # disparity model
    config.disparity_speckle = 0.02
    config.disparity_failure_prob = 0.1

    # ego motion for pose records
    config.ego_speed_m = 1.0
    config.lane_spacing_m = 12.0

    config.tracker = get_tracker_config()
    config.detection_threshold = 0.5
    return config


def get_small_synth_config():
    config = get_synth_config()
    config.n_sequences = 6
    config.frames_per_sequence = 60
    return config


CONFIG_MAP = {
    'default': get_synth_config,
    'small': get_small_synth_config,
}
