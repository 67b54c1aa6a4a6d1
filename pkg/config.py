# general vars
DEFAULT_JOBS = 4
JOBS_ENV = "RAINBC_JOBS"
LOG_LEVEL_ENV = "RAINBC_LOG_LEVEL"
DEFAULT_OUTPUT_DIR = "out"
# file names
CLEAN_SUFFIX = ".clean.csv"
FLAGS_SUFFIX = ".qcflags.csv"
PARAMS_SUFFIX = ".params.json"
CORRECTED_SUFFIX = ".corrected.csv"
CROSSVAL_SUFFIX = ".cv.csv"
REPORT_SUFFIX = ".report.json"
GAUGE_SUFFIX = ".gauge.csv"
MODEL_SUFFIX = ".model.csv"
REPORT_TABLES = "report_tables.csv"
PLOTS_DIR = "plots"
CONFIG_NAME = "config.json"
# synthetic stations
DEFAULT_SEED = 0
DEFAULT_SYNTH_STATIONS = 1
SYNTH_STATION_PREFIX = "synth"
