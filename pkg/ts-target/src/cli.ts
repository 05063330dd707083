/**
 * Entry point: xeg-target-server --port N [--host H] [--echo] [--color X]
 * Prints "LISTENING <port>" once the socket is bound.
 */

import { AddressInfo } from "node:net";

import { ServerConfig, startServer } from "./server.js";

function parseArgs(argv: string[]): ServerConfig {
  const config: ServerConfig = { port: NaN };
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--port":
        config.port = Number.parseInt(argv[++i] ?? "", 10);
        break;
      case "--host":
        config.host = argv[++i];
        break;
      case "--echo":
        config.echo = true;
        break;
      case "--color":
        config.colorValue = argv[++i];
        break;
      default:
        console.error(`unknown argument ${argv[i]}`);
        process.exit(2);
    }
  }
  if (!Number.isInteger(config.port) || config.port < 0) {
    console.error("usage: --port N [--host H] [--echo] [--color X]");
    process.exit(2);
  }
  return config;
}

const config = parseArgs(process.argv.slice(2));
startServer(config).then(
  (server) => {
    const address = server.address() as AddressInfo;
    console.log(`LISTENING ${address.port}`);
  },
  (err) => {
    console.error(`failed to listen: ${err.message}`);
    process.exit(4);
  },
);
