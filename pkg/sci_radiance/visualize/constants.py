DEFAULT_LINE_COLORS: tuple[str, str] = ("#636EFA", "#EF553B")

SWEEP_COLORS: dict[str, str] = {
    "trainer_psnr": "#7570b3",
    "gaptv_psnr": "#d95f02",
}

SWEEP_TITLES: dict[str, str] = {
    "overlap_rate": "Mask overlapping rate",
    "n_frames": "Compression ratio",
}
