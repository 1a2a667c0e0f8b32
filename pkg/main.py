"""局域态系综发光模型 - 程序入口。"""

import sys
import os
import json
import logging

# 路径适配：打包后使用 exe 所在目录，开发时使用项目目录
if getattr(sys, "frozen", False):
    BASE_DIR = os.path.dirname(sys.executable)
else:
    BASE_DIR = os.path.dirname(os.path.abspath(__file__))

# 配置日志
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    handlers=[
        logging.StreamHandler(),
        logging.FileHandler(
            os.path.join(BASE_DIR, "lse_luminescence.log"),
            encoding="utf-8",
        ),
    ],
)
logger = logging.getLogger(__name__)

CONFIG_PATH = os.path.join(BASE_DIR, "config.json")

# 参考参数集
DEFAULT_CONFIG = {
    "schema_version": 1,
    "dos": {
        "center_E0_eV": 3.0,
        "variance_sigma2_eV2": 0.01,
        "density_Nl": 1.0,
    },
    "rate_laws": {
        "gamma_L0_per_ps": 0.003588,
        "gamma_R0_per_ps": 0.0006298,
        "gamma_P0_per_ps": 0.0003915,
        "beta_ee": -0.95,
        "C_per_ps": 0.0,
        "E_a_eV": 3.009,
        "E_F_launch_eV": 3.05,
        "E_F_receive_eV": 2.95,
        "re_excite_base": 1.0,
        "re_excite_kappa": 0.0,
    },
    "phonons": {
        "optical": {"energy_hw_eV": 0.09, "base_width_per_ps": 0.2, "spontaneous_floor_per_ps": 0.0},
        "acoustic": {"energy_hw_eV": 0.008, "base_width_per_ps": 0.00334, "spontaneous_floor_per_ps": 0.0},
    },
    "path": {
        "n_tr": 1.0, "n_sc": 1.0, "n_p": 1.0, "n_re": 1.0,
        "t_tr_ps": 1.0, "t_sc_ps": 1.0, "t_p_ps": 1.0, "t_re_ps": 1.0,
    },
    "gel": {"mode": "Fixed", "t_lsc_fixed_ps": 22.8, "alpha": 1.0},
    "toggles": {"include_gel": True, "include_ep": True, "vary_ee": True},
    "grid": {
        "mu_points": 2001,
        "mu_half_width_sigmas": 5.0,
        "temperatures_K": [float(t) for t in range(10, 301, 10)],
    },
    "constants": {"natural_units": False},
}


def ensure_config():
    """配置文件不存在时写入参考配置。"""
    if os.path.exists(CONFIG_PATH):
        return
    try:
        with open(CONFIG_PATH, "w", encoding="utf-8") as f:
            json.dump(DEFAULT_CONFIG, f, ensure_ascii=False, indent=2)
        logger.info(f"已写入参考配置: {CONFIG_PATH}")
    except Exception as e:
        logger.warning(f"写入默认配置失败: {e}")


def main():
    logger.debug(f"程序启动，基础目录: {BASE_DIR}")
    ensure_config()

    from cli.app import main as cli_main

    sys.exit(cli_main(sys.argv[1:], default_config=CONFIG_PATH))


if __name__ == "__main__":
    main()
