from .config import BenchConfig, DomainSpec, ModelConfig, TaskSpec
from .report import ReportRow, ReportTable, emit_report, parse_report_csv
from .embed import dump_embeddings
from .runner import SeedResult, TaskResult, evaluate, evaluate_metrics, run_matrix, run_task
from .gradsuite import CASES, CaseResult, run_gradsuite
