import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    # Oracle size caps
    GIGMATCH_BUDGET = int(os.getenv('GIGMATCH_BUDGET', '10000000'))
    GIGMATCH_MAX_AGENTS = int(os.getenv('GIGMATCH_MAX_AGENTS', '16'))
    GIGMATCH_MAX_SEQUENCES = int(os.getenv('GIGMATCH_MAX_SEQUENCES', '1000000'))
    GIGMATCH_OFF_SAMPLES = int(os.getenv('GIGMATCH_OFF_SAMPLES', '20000'))

    # Benchmark LP
    GIGMATCH_MAX_LP_COLUMNS = int(os.getenv('GIGMATCH_MAX_LP_COLUMNS', '5000'))

    # Tolerances
    GIGMATCH_FEAS_TOL = float(os.getenv('GIGMATCH_FEAS_TOL', '1e-9'))
    GIGMATCH_OBJ_TOL = float(os.getenv('GIGMATCH_OBJ_TOL', '1e-7'))
    GIGMATCH_PROB_TOL = float(os.getenv('GIGMATCH_PROB_TOL', '1e-9'))

    # Monte Carlo
    GIGMATCH_DEFAULT_N = int(os.getenv('GIGMATCH_DEFAULT_N', '100000'))
    GIGMATCH_DEFAULT_SEED = int(os.getenv('GIGMATCH_DEFAULT_SEED', '42'))
    GIGMATCH_CHUNK = int(os.getenv('GIGMATCH_CHUNK', '20000'))

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('LOG_FILE', '')

    @classmethod
    def validate(cls):
        """Validate that every size cap and tolerance is positive"""
        positive_vars = [
            'GIGMATCH_BUDGET',
            'GIGMATCH_MAX_AGENTS',
            'GIGMATCH_MAX_SEQUENCES',
            'GIGMATCH_OFF_SAMPLES',
            'GIGMATCH_MAX_LP_COLUMNS',
            'GIGMATCH_FEAS_TOL',
            'GIGMATCH_OBJ_TOL',
            'GIGMATCH_PROB_TOL',
            'GIGMATCH_DEFAULT_N',
            'GIGMATCH_CHUNK'
        ]

        invalid_vars = []
        for var in positive_vars:
            if not getattr(cls, var) > 0:
                invalid_vars.append(var)

        if invalid_vars:
            raise ValueError(f"Non-positive configuration values: {', '.join(invalid_vars)}")

        return True
