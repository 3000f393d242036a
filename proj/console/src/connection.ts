import { Socket, connect } from "node:net";

import { Message, MessageFramer, encodeMessage, frameMessage } from "./schema.js";

/** Length-prefixed JSON over TCP to the teleop service. */
export class ServiceConnection {
  private readonly framer = new MessageFramer();
  private constructor(private readonly socket: Socket) {}

  static open(host: string, port: number, onText: (text: string) => void, onClose?: () => void): Promise<ServiceConnection> {
    return new Promise((resolve, reject) => {
      const socket = connect({ host, port });
      const conn = new ServiceConnection(socket);
      socket.once("error", reject);
      socket.once("connect", () => {
        socket.off("error", reject);
        socket.on("error", () => socket.destroy());
        resolve(conn);
      });
      socket.on("data", (chunk: Buffer) => {
        conn.framer.feed(chunk);
        for (let text = conn.framer.next(); text !== undefined; text = conn.framer.next()) onText(text);
      });
      socket.on("close", () => onClose?.());
    });
  }

  send(msg: Message): void {
    this.socket.write(frameMessage(encodeMessage(msg)));
  }

  close(): void {
    this.socket.end();
  }
}
