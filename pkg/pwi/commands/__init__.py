"""
命令模块
每个子命令一个模块，提供 add_parser(subparsers) 和 run(config)
"""
