"""echoforge: a dual-band ultrasonic FMCW sensing stack.

Chirp synthesis and band separation, correlation-based echo profiles, a
synthetic acoustic scene simulator that doubles as an analytic test oracle,
session dataset handling with leave-one-out split planning, and a numpy-only
residual convolutional classifier for 30 hand microgestures.
"""

from .augment import AugmentPolicy, amplitude_jitter, augment_tensor, vertical_shift
from .dataset import (
    FineTuneBudget,
    GestureLabel,
    LabeledInstance,
    Lopo,
    Loso,
    Marker,
    ObjectIndependent,
    SessionMeta,
    SplitPlan,
    apply_exclusions,
    instances_to_arrays,
    load_corpus,
    load_session,
    make_split,
    save_session,
    slice_instances,
)
from .dsp import (
    BAND_HIGH,
    BAND_LOW,
    RATE,
    SPEED_OF_SOUND,
    SWEEP_HIGH,
    SWEEP_LOW,
    SWEEP_SAMPLES,
    FilterKernel,
    FilterSpec,
    Mic,
    PcmStream,
    SweepConfig,
    apply_filter,
    design_bandpass,
    generate_sweep,
    segment_frames,
)
from .echo import (
    METERS_PER_BIN,
    TENSOR_BINS,
    TENSOR_CHANNELS,
    TENSOR_FRAMES,
    Channel,
    EchoProfile,
    EchoTensor,
    build_echo_profile,
    compute_channel_profiles,
    crop_window,
    cross_correlate,
    differential_profile,
    load_eprf,
    save_eprf,
    save_heatmap_png,
    stack_tensor,
    tensor_from_mic_streams,
    unstack_tensor,
    window_and_stack,
)
from .errors import ConfigError, FilterDesignError, IngestError, NumericError
from .metrics import (
    ConfusionMatrix,
    confusion,
    false_positive_rate,
    finetune_curve,
    fold_average,
)
from .model import (
    BlockSpec,
    ModelParams,
    ModelSpec,
    forward,
    init_params,
    load_checkpoint,
    loss_and_grad,
    predict,
    save_checkpoint,
)
from .simulate import (
    Reflector,
    Scene,
    SyntheticGestureScript,
    builtin_scripts,
    build_synthetic_instances,
    load_scene,
    render_mic_streams,
    render_received,
    save_scene,
    synth_gesture_set,
    write_synthetic_corpus,
)
from .train import TrainConfig, evaluate, train, two_step_train

__version__ = "0.1.0"
